"""PEC-plane benchmark at several resolutions (convergence of the potential pipeline)."""

import argparse
import warnings

from cpinverse.validation import validate_plane


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--resolutions", default="10,20", help="comma-separated cells per L0 (every z must be whole cells)")
    ap.add_argument("--z", default="0.8,1.0,1.5,2.0")
    args = ap.parse_args()
    z = [float(v) for v in args.z.split(",")]
    for res in (int(r) for r in args.resolutions.split(",")):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            rep = validate_plane(z, resolution=res)
        print("\n".join(rep.lines()))


if __name__ == "__main__":
    main()
