"""Search composite inversion pulses with 0 to 4 sidebands and compare with the tabulated ones."""

import argparse
from pathlib import Path

from nvdnp import powder as pw
from nvdnp import pulsepol as pp
from nvdnp.optimize import OptimizerConfig, accounting, objective, optimize


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/optimize_pulses")
    ap.add_argument("--omega1", type=float, default=10.5)
    ap.add_argument("--threshold", type=float, default=0.95)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table = {0: "normal", 2: "2-sideband", 3: "3-sideband", 4: "4-sideband"}
    rows = []
    for k in range(5):
        cfg = OptimizerConfig(n_sidebands=k, fidelity_threshold=args.threshold, seed=args.seed,
                              threads=args.threads)
        cand = optimize(cfg, args.omega1)
        cand.to_csv(out / f"pulse_{k}sb.csv")
        ref = float("nan")
        if k in table:
            ref = objective(pp.PULSE_TABLE[table[k]].a_list, args.omega1, args.threshold, cfg.grid(args.omega1))
        rows.append((k, cand.bandwidth / args.omega1, ref / args.omega1, *accounting(cand.a_list)))
        print(f"{k} sidebands: found {cand.bandwidth / args.omega1:.3f} Omega, "
              f"tabulated {ref / args.omega1:.3f} Omega, a = {tuple(round(a, 4) for a in cand.a_list)}")
    pw.write_csv(out / "summary.csv", ["n_sidebands", "found_bw_over_omega", "tabulated_bw_over_omega",
                                       "duration", "power"], rows)


if __name__ == "__main__":
    main()
