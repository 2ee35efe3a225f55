"""Device-to-system simulator for stochastic MTJ spiking neural networks."""
__version__ = "0.1.0"
