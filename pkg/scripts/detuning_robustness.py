"""Polarization-transfer bandwidth of each tabulated pulse shape versus Rabi frequency."""

import argparse
from pathlib import Path

from nvdnp import powder as pw
from nvdnp import pulsepol as pp


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/detuning_robustness")
    ap.add_argument("--omega1", type=float, nargs="+", default=[10.5, 20.0, 30.0, 50.0])
    ap.add_argument("--threshold", type=float, default=0.8)
    ap.add_argument("--M", type=int, default=10)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for om in args.omega1:
        base = pp.SequenceSpec(phi=pp.PHI_OFFSET, n=4.5, M=args.M, omega1=om)
        for name, pulse in sorted(pp.PULSE_TABLE.items()):
            try:
                w = pp.transfer_bandwidth(pp.SpinModel(), base.with_(pulse=pulse), args.threshold) / om
            except pp.SequenceTimingError:
                w = float("nan")
            rows.append((om, name, w))
            print(f"Omega={om:<5g} {name:>11}: bandwidth {w:.3f} Omega")
    pw.write_csv(out / "bandwidth.csv", ["omega1_MHz", "pulse", "bandwidth_over_omega"], rows)


if __name__ == "__main__":
    main()
