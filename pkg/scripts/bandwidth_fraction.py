"""Fraction of NV orientations inside the polarization bandwidth versus line width.

Compares a line width applied on the frequency axis with the same width
converted from field units.
"""

import argparse
from pathlib import Path

from nvdnp import powder as pw
from nvdnp.spin import NvSystem


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/bandwidth_fraction")
    ap.add_argument("--delta-pol", type=float, default=15.0, help="MHz")
    ap.add_argument("--B", type=float, default=287.0, help="mT")
    ap.add_argument("--n-theta", type=int, default=1500)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sys_ = NvSystem()
    carrier = pw.perpendicular_carrier(sys_, args.B, args.delta_pol)
    rows = []
    for lw in (0.0, 0.2, 0.4, 0.8):
        for ex in (0.0, 21.0, 27.0):
            for unit in ("MHz", "mT"):
                br = pw.BroadeningModel(lw, ex, unit)
                f = pw.bandwidth_fraction(sys_, carrier, args.B, args.delta_pol, br, n_theta=args.n_theta)
                rows.append((lw, unit, ex, 100 * f["s1s2"], 100 * f["s2s3"]))
                print(f"lw={lw:<4g}{unit:<4} ex={ex:<5g} s1s2={100 * f['s1s2']:.3f}%  s2s3={100 * f['s2s3']:.3f}%")
    pw.write_csv(out / "fraction.csv", ["lw", "lw_unit", "ex_fwhm_MHz", "s1s2_pct", "s2s3_pct"], rows)


if __name__ == "__main__":
    main()
