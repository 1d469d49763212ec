"""Merit of slit plates (a ring in axial mode) in front of the atom.

Scans plate thickness h, front-face distance d and aperture half-width a to
map where the structure pushes the atom away (negative merit).
"""

import argparse

from cpinverse import levelset as ls
from cpinverse.adjoint import CPProblem
from cpinverse.materials import gold_preset
from cpinverse.sim import SimulationConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--symmetry", choices=["none", "axial"], default="axial")
    ap.add_argument("--h", default="0.1,0.2,0.4")
    ap.add_argument("--d", default="0.1,0.2,0.5,0.9")
    ap.add_argument("--a", default="0.2,0.4,0.7,1.2")
    args = ap.parse_args()
    floats = lambda s: [float(v) for v in s.split(",")]
    cfg = SimulationConfig(2, 8.0, 10, 1.0, 0.5, 60.0, symmetry=args.symmetry)
    p = CPProblem(cfg, gold_preset(), x_atom=-0.55, stride=2)
    xa = p.r_atom[0]
    A = floats(args.a)
    print("h d | merit for a = " + " ".join(f"{a:g}" for a in A))
    for h in floats(args.h):
        for d in floats(args.d):
            row = []
            for a in A:
                geo = ls.union(ls.init_box(p.grid, (xa + d, a), (xa + d + h, a + 1.5)),
                               ls.init_box(p.grid, (xa + d, -a - 1.5), (xa + d + h, -a)))
                row.append(p.merit(geo))
            print(f"{h:g} {d:g} | " + " ".join(f"{m:+.3e}" for m in row))


if __name__ == "__main__":
    main()
