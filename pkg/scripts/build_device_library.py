"""Regenerate the bundled device library from the LLGS model.

    python3 scripts/build_device_library.py --out src/mtjsnn/data/device_library.json
"""
import argparse
import json
import time

from mtjsnn.library import build_library


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", required=True)
    ap.add_argument("--n-trials", type=int, default=4000)
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()
    t = time.time()
    lib = build_library(n_trials=args.n_trials, seed=args.seed)
    lib["build_seconds"] = round(time.time() - t, 1)
    with open(args.out, "w") as fh:
        json.dump(lib, fh, indent=2)
    for name, e in lib["devices"].items():
        fit = e.get("sync") or e.get("async")
        print(f"{name}: delta {e['delta_kbt']:.3f}, pulsed i_bias {e['pulsed']['i_bias_A'] * 1e6:.2f} uA "
              f"i_o {e['pulsed']['i_o_A'] * 1e6:.2f} uA; {e['mode']} i_bias {fit['i_bias_A'] * 1e6:.2f} uA "
              f"i_o {fit['i_o_A'] * 1e6:.3f} uA residual {fit['residual']:.3f}"
              + (f", pulse width {fit['pulse_width_s'] * 1e9:.2f} ns" if "pulse_width_s" in fit else ""))


if __name__ == "__main__":
    main()
