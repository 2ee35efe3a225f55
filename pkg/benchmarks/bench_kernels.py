"""Throughput of the LLGS ensemble kernel and the read filter, per backend.

    python3 benchmarks/bench_kernels.py            # both backends, in subprocesses
    python3 benchmarks/bench_kernels.py --single   # current backend only

The backend follows ``MTJSNN_DISABLE_NUMBA``; the default run launches one
child process per setting and prints a comparison table.
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def bench(n_members, n_steps, repeats):
    from mtjsnn._accel import backend_name
    from mtjsnn.llgs import Ensemble, table1_device
    from mtjsnn.readout import ReadCircuitParams, filter_levels
    from mtjsnn.device import hysteretic_states

    params = table1_device(1)
    m0 = np.tile([1.0, 0.0, 0.0], (n_members, 1))
    currents = np.zeros(n_members)
    # warm-up call compiles the kernels outside the timed region
    Ensemble(params, m0, dt=1e-12, seed=0).run(10, currents, record_stride=10)
    best = float("inf")
    for r in range(repeats):
        ens = Ensemble(params, m0, dt=1e-12, seed=r)
        t = time.perf_counter()
        rec = ens.run(n_steps, currents, record_stride=10)
        best = min(best, time.perf_counter() - t)
    comp = hysteretic_states(rec[0, :, 0])
    circuit = ReadCircuitParams()
    filter_levels(comp, 1e-11, circuit)
    t = time.perf_counter()
    filter_levels(comp, 1e-11, circuit)
    filt = time.perf_counter() - t
    return {
        "backend": backend_name(),
        "members": n_members,
        "steps": n_steps,
        "llgs_seconds": best,
        "member_steps_per_s": n_members * n_steps / best,
        "filter_samples_per_s": len(comp) / max(filt, 1e-9),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--members", type=int, default=256)
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--single", action="store_true")
    args = ap.parse_args()
    if args.single:
        print(json.dumps(bench(args.members, args.steps, args.repeats)))
        return
    rows = []
    for flag in ("0", "1"):
        env = dict(os.environ, MTJSNN_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, __file__, "--single", "--members", str(args.members),
                              "--steps", str(args.steps), "--repeats", str(args.repeats)],
                             env=env, capture_output=True, text=True, check=True)
        rows.append(json.loads(out.stdout.strip().splitlines()[-1]))
    print(f"{'backend':8s} {'LLGS member-steps/s':>20s} {'filter samples/s':>18s}")
    for r in rows:
        print(f"{r['backend']:8s} {r['member_steps_per_s']:20.3g} {r['filter_samples_per_s']:18.3g}")
    print(f"LLGS speed-up: {rows[0]['member_steps_per_s'] / rows[1]['member_steps_per_s']:.1f}x")


if __name__ == "__main__":
    main()
