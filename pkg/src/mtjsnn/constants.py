"""Physical constants (CODATA 2018)."""
from dataclasses import dataclass


@dataclass(frozen=True)
class PhysicalConstants:
    gamma: float = 1.76085963023e11  # electron gyromagnetic ratio, rad/(s T)
    hbar: float = 1.054571817e-34  # J s
    e_charge: float = 1.602176634e-19  # C
    mu0: float = 1.25663706212e-6  # T m / A
    kB: float = 1.380649e-23  # J / K

    @property
    def gamma_h(self):
        """Gyromagnetic ratio for fields in A/m, m/(A s)."""
        return self.mu0 * self.gamma


CONSTANTS = PhysicalConstants()
