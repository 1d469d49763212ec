"""Discovery run from the disk: 2D Cartesian, 2D axial or coarse 3D."""

import argparse
import logging
import time

from cpinverse import levelset as ls
from cpinverse.adjoint import CPProblem
from cpinverse.materials import gold_preset
from cpinverse.optimizer import Optimizer, OptimizerSettings, StoppingRule
from cpinverse.sim import SimulationConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--geometry", choices=["cartesian", "axial", "3d"], default="axial")
    ap.add_argument("--resolution", type=int, default=10)
    ap.add_argument("--x0", type=float, default=1.1, help="atom to disk-centre distance, L0")
    ap.add_argument("--iterations", type=int, default=25)
    ap.add_argument("--step-cells", type=float, default=1.0)
    ap.add_argument("--preset", choices=["gold", "gold-jc"], default="gold")
    ap.add_argument("--mode", choices=["exact", "kernel"], default="exact")
    ap.add_argument("--output", help="artifact directory")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    dim = 3 if args.geometry == "3d" else 2
    sym = "axial" if args.geometry == "axial" else "none"
    cfg = SimulationConfig(dim, 8.0, args.resolution, 1.0, 0.5, 60.0, symmetry=sym)
    p = CPProblem(cfg, gold_preset(args.preset), x_atom=-0.55, stride=2)
    geo = ls.init_cylinder(p.grid, 1.5, 0.4, (p.r_atom[0] + args.x0,) + (0.0,) * (dim - 1))
    s = OptimizerSettings(StoppingRule(args.iterations), step_cells=args.step_cells, mode=args.mode)
    t = time.time()
    st = Optimizer(p, s, output=args.output).run(geo)
    print(f"status {st.status} after {st.iteration} iterations, {time.time() - t:.0f} s")
    print("iteration merit normalized topology(components,holes,axis_clear) backtracks")
    for i, (m, n, tp, b) in enumerate(zip(st.merits, st.normalized, st.topology, st.backtracks)):
        print(f"{i:3d} {m:+.4e} {n:+.4f} {tp} {b}")


if __name__ == "__main__":
    main()
