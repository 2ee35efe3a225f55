"""Train a reference sigmoid CNN (28x28-Ac5-2s-Bc5-2s-10o) on the bundled MNIST subset.

Not part of the package: needs PyTorch.  Writes a weight document in the
crossbar JSON format::

    python3 scripts/train_reference_net.py --out src/mtjsnn/data/lenet6-12.json
    python3 scripts/train_reference_net.py --c1 4 --c2 8 --var-penalty 20000 \
        --name lenet4-8 --out src/mtjsnn/data/lenet4-8.json

Weights are clipped to |w| <= W_MAX after every optimiser step so that the
largest single-synapse drive stays within the useful range of the neuron
sigmoid.  ``--var-penalty`` discourages large Bernoulli variance of each
neuron's input current, which keeps the spiking network's mean rates close
to the deterministic sigmoid activations.  ``--stochastic`` trains a fraction
of batches through sampled Bernoulli spikes (straight-through gradient), so
the network learns to classify from few spikes.
"""
import argparse
import json

import numpy as np
import torch
import torch.nn.functional as F

from mtjsnn.mnist import bundled

W_MAX = 3.0


class Net(torch.nn.Module):
    def __init__(self, c1=6, c2=12):
        super().__init__()
        self.conv1 = torch.nn.Conv2d(1, c1, 5)
        self.conv2 = torch.nn.Conv2d(c1, c2, 5)
        self.fc = torch.nn.Linear(c2 * 16, 10)

    def forward(self, x, stochastic=False):
        # returns logits of every layer and the input activations of every layer
        spike = _spike if stochastic else (lambda a: a)
        a0 = spike(x)
        z1 = self.conv1(a0)
        a1 = spike(torch.sigmoid(z1))
        p1 = F.avg_pool2d(a1, 2)
        z2 = self.conv2(p1)
        a2 = spike(torch.sigmoid(z2))
        p2 = F.avg_pool2d(a2, 2).flatten(1)
        z3 = self.fc(p2)
        return (z1, z2, z3), (a0, a1, a2)

    def drive_variance(self, acts):
        # Var of each neuron's summed drive when its inputs are independent
        # Bernoulli spikes with the given rates; pooled inputs carry w/4.
        a0, a1, a2 = acts
        v0 = a0 * (1 - a0)
        var1 = F.conv2d(v0, self.conv1.weight ** 2)
        v1 = F.avg_pool2d(a1 * (1 - a1), 2) / 4
        var2 = F.conv2d(v1, self.conv2.weight ** 2)
        v2 = (F.avg_pool2d(a2 * (1 - a2), 2) / 4).flatten(1)
        var3 = v2 @ (self.fc.weight ** 2).T
        return var1, var2, var3


def _spike(a):
    # Bernoulli sample with a straight-through gradient
    return a + (torch.bernoulli(a) - a).detach()


def jensen_gap(z, var):
    s = torch.sigmoid(z)
    d2 = s * (1 - s) * (1 - 2 * s)
    return 0.5 * d2 * var


def shift_batch(x, rng, max_shift=2):
    out = torch.zeros_like(x)
    for k in range(x.shape[0]):
        dy, dx = rng.integers(-max_shift, max_shift + 1, size=2)
        out[k] = torch.roll(x[k], shifts=(int(dy), int(dx)), dims=(1, 2))
    return out


def to_document(net, name):
    def flat(t):
        return [float(v) for v in t.detach().numpy().ravel()]

    c1, c2 = net.conv1.weight.shape[0], net.conv2.weight.shape[0]
    return {
        "name": name,
        "scale": 1.0,
        "input_shape": [1, 28, 28],
        "layers": [
            {"type": "conv", "kernel": [c1, 1, 5, 5], "weights": flat(net.conv1.weight),
             "bias": flat(net.conv1.bias)},
            {"type": "subsample", "kernel": [2, 2]},
            {"type": "conv", "kernel": [c2, c1, 5, 5], "weights": flat(net.conv2.weight),
             "bias": flat(net.conv2.bias)},
            {"type": "subsample", "kernel": [2, 2]},
            {"type": "full", "kernel": [10, c2 * 16], "weights": flat(net.fc.weight),
             "bias": flat(net.fc.bias)},
        ],
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", required=True)
    ap.add_argument("--epochs", type=int, default=60)
    ap.add_argument("--lr", type=float, default=1e-2)
    ap.add_argument("--var-penalty", type=float, default=0.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--name", default="lenet6-12")
    ap.add_argument("--stochastic", type=float, default=0.0,
                    help="fraction of batches trained through sampled spikes")
    ap.add_argument("--bce", type=float, default=0.0,
                    help="weight of a one-vs-all output term that saturates output rates")
    ap.add_argument("--c1", type=int, default=6)
    ap.add_argument("--c2", type=int, default=12)
    args = ap.parse_args()

    torch.manual_seed(args.seed)
    rng = np.random.default_rng(args.seed)
    xtr, ytr = bundled("train")
    xte, yte = bundled("test")
    xtr = torch.tensor(xtr, dtype=torch.float32)[:, None]
    xte = torch.tensor(xte, dtype=torch.float32)[:, None]
    ytr = torch.tensor(ytr)
    yte = torch.tensor(yte)

    net = Net(args.c1, args.c2)
    opt = torch.optim.Adam(net.parameters(), lr=args.lr)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, args.epochs)
    for epoch in range(args.epochs):
        net.train()
        perm = torch.randperm(len(ytr))
        for i in range(0, len(perm), 64):
            idx = perm[i:i + 64]
            x = shift_batch(xtr[idx], rng)
            stochastic = rng.random() < args.stochastic
            zs, acts = net(x, stochastic)
            # softmax cross-entropy on the output drives; the output neurons'
            # sigmoid is monotone so the spike-count argmax is unchanged
            loss = F.cross_entropy(zs[-1], ytr[idx])
            if args.bce:
                target = F.one_hot(ytr[idx], 10).float()
                loss = loss + args.bce * F.binary_cross_entropy_with_logits(zs[-1], target)
            if args.var_penalty and not stochastic:
                gaps = [jensen_gap(z, v) for z, v in zip(zs, net.drive_variance(acts))]
                loss = loss + args.var_penalty * sum((g ** 2).mean() for g in gaps)
            opt.zero_grad()
            loss.backward()
            opt.step()
            with torch.no_grad():
                for p in net.parameters():
                    p.clamp_(-W_MAX, W_MAX)
        sched.step()
        if epoch % 10 == 9 or epoch == args.epochs - 1:
            net.eval()
            with torch.no_grad():
                zs, acts = net(xte)
                acc = (zs[-1].argmax(1) == yte).float().mean().item()
                gaps = [jensen_gap(z, v).abs().max().item()
                        for z, v in zip(zs, net.drive_variance(acts))]
            print(f"epoch {epoch + 1}: test acc {acc:.4f}, max gap estimate "
                  + ", ".join(f"{g:.3f}" for g in gaps), flush=True)
    with open(args.out, "w") as fh:
        json.dump(to_document(net, args.name), fh)


if __name__ == "__main__":
    main()
