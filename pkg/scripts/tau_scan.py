"""PulsePol tau scans for the standard and phase-offset phase families.

Also compares NV polarization loss at n = 3.5 and n = 4.5 in the model with
the 14N hyperfine structure.
"""

import argparse
from pathlib import Path

from nvdnp import pulsepol as pp


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/tau_scan")
    ap.add_argument("--M", type=int, default=300)
    ap.add_argument("--omega1", type=float, default=50.0)
    ap.add_argument("--n-points", type=int, default=751)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, phi in (("standard", pp.PHI_STANDARD), ("phase-offset", pp.PHI_OFFSET)):
        spec = pp.SequenceSpec(phi=phi, M=args.M, omega1=args.omega1)
        L = spec.larmor
        res = pp.scan_tau(pp.SpinModel(), spec, (pp.resonance_tau(0.5, L), pp.resonance_tau(8.0, L)),
                          args.n_points, threads=args.threads)
        res.to_csv(out / f"tau_{name}.csv")
        dips = res.resonances(0.05, pp.resonance_tau(0.3, L)) * 2 * L
        print(f"{name:>12}: dips at n = " + ", ".join(f"{n:.2f}" for n in dips))
    for pulse_name in ("normal", "2-sideband"):
        for om in (10.5, 30.0):
            loss = {}
            for n in (3.5, 4.5):
                spec = pp.SequenceSpec(phi=pp.PHI_OFFSET, n=n, M=20, omega1=om, pulse=pp.PULSE_TABLE[pulse_name])
                try:
                    loss[n] = 1 - pp.propagate(pp.SpinModel(kind="full-n14"), spec).final_nv
                except pp.SequenceTimingError:
                    loss[n] = float("nan")
            print(f"14N {pulse_name:>10} Omega={om:<5g} NV loss n=3.5: {loss[3.5]:.3f}  n=4.5: {loss[4.5]:.3f}")


if __name__ == "__main__":
    main()
