import numpy as np
import pytest

from cpinverse import levelset as ls
from cpinverse.adjoint import CPProblem
from cpinverse.materials import gold_preset
from cpinverse.optimizer import (
    OptimizationState,
    Optimizer,
    OptimizerSettings,
    StoppingRule,
    check_geometry,
    load_checkpoint,
    resume,
    save_checkpoint,
)
from cpinverse.sim import SimulationConfig


@pytest.fixture(scope="module")
def problem():
    return CPProblem(SimulationConfig(2, 6.0, 10, 1.0, 0.5, 30.0), gold_preset(), x_atom=-0.55)


def default_disk(p, x0=1.1):
    return ls.init_cylinder(p.grid, 1.5, 0.4, (p.r_atom[0] + x0, 0.0))


def settings(n, **kw):
    return OptimizerSettings(StoppingRule(n), **kw)


@pytest.fixture(scope="module")
def two_steps(problem):
    return Optimizer(problem, settings(2)).run(default_disk(problem))


def test_first_iteration_lowers_merit(two_steps):
    assert two_steps.iteration == 2 and two_steps.status == "budget"
    assert two_steps.merits[1] < two_steps.merits[0]
    assert np.all(np.diff(two_steps.merits) <= 0)


def test_zero_step_is_identity(problem):
    geo = default_disk(problem)
    opt = Optimizer(problem, settings(1, step_cells=0.0))
    v = opt.velocity(geo)
    assert np.array_equal(opt.propose(geo, v, 1.0).phi, geo.phi)


def test_step_respects_trust_region(problem):
    geo = default_disk(problem)
    opt = Optimizer(problem, settings(1))
    g = opt.propose(geo, opt.velocity(geo), 1.0)
    # the contour moves at most about one cell; the interior sign can flip only next to it
    flipped = (g.phi < 0) != (geo.phi < 0)
    assert flipped.any() and np.all(np.abs(geo.phi[flipped]) <= 1.5 * problem.config.dx)


def test_initial_geometry_checked(problem):
    xa = problem.r_atom[0]
    with pytest.raises(ValueError):
        check_geometry(problem, ls.init_cylinder(problem.grid, 1.5, 0.4, (xa, 0.0)), OptimizerSettings())
    with pytest.raises(ValueError):
        check_geometry(problem, ls.init_cylinder(problem.grid, 5.0, 0.4, (xa + 1.1, 0.0)), OptimizerSettings())


def _state(problem, merits, geometry=None):
    g = geometry if geometry is not None else default_disk(problem)
    n = len(merits)
    return OptimizationState(n - 1, g, list(merits), [0.0] * n, [True] * n, [0] * n, [""] * n, [(1, 0, 1)] * n)


@pytest.mark.parametrize("merits,expect", [
    ([1.0, 0.5, 0.25], None),
    ([1.0, -0.5, -0.501, -0.502, -0.5025], "converged"),
    ([1.0, 0.5, 0.501, 0.502, 0.5025], "stalled"),
    ([1.0, 0.9, 0.8, 0.7, 0.6, 0.5], "budget"),
])
def test_stop_rules(problem, merits, expect):
    opt = Optimizer(problem, OptimizerSettings(StoppingRule(5)))
    assert opt.stop_reason(_state(problem, merits)) == expect


def test_vanished(problem):
    opt = Optimizer(problem, settings(5))
    assert opt.stop_reason(_state(problem, [1.0, 1e-9], ls.empty_field(problem.grid))) == "vanished"


def test_plateau_without_sign_requirement(problem):
    opt = Optimizer(problem, OptimizerSettings(StoppingRule(9, require_negative=False)))
    assert opt.stop_reason(_state(problem, [1.0, 0.5, 0.501, 0.502, 0.5025])) == "converged"


def test_rejected_steps_stall(problem):
    # a ten-cell trust region overshoots; with no halvings allowed the run must stall, not crash
    opt = Optimizer(problem, settings(3, step_cells=10.0, substeps=20, max_backtracks=0))
    st = opt.run(default_disk(problem, 0.8))
    assert st.status in ("stalled", "budget", "vanished")
    assert np.all(np.diff(st.merits) <= 0)


def test_checkpoint_round_trip(tmp_path, two_steps):
    p = tmp_path / "c.ckpt"
    save_checkpoint(p, two_steps, "abc")
    st = load_checkpoint(p, "abc")
    assert np.array_equal(st.geometry.phi, two_steps.geometry.phi)
    assert st.merits == two_steps.merits and st.hashes == two_steps.hashes and st.iteration == 2


def test_checkpoint_wrong_hash(tmp_path, two_steps):
    p = tmp_path / "c.ckpt"
    save_checkpoint(p, two_steps, "abc")
    with pytest.raises(ValueError, match="belongs"):
        load_checkpoint(p, "xyz")


def test_checkpoint_corruption_detected(tmp_path, two_steps):
    p = tmp_path / "c.ckpt"
    save_checkpoint(p, two_steps, "abc")
    raw = bytearray(p.read_bytes())
    raw[len(raw) // 2] ^= 0xFF
    p.write_bytes(bytes(raw))
    with pytest.raises(ValueError, match="checksum"):
        load_checkpoint(p)
    p.write_bytes(bytes(raw[:100]))
    with pytest.raises(ValueError):
        load_checkpoint(p)
    (tmp_path / "x.ckpt").write_bytes(b"garbage!" * 10)
    with pytest.raises(ValueError, match="magic"):
        load_checkpoint(tmp_path / "x.ckpt")


def test_resume_equals_straight_run(tmp_path, problem, two_steps):
    Optimizer(problem, settings(1), "h", output=tmp_path).run(default_disk(problem))
    st = resume(tmp_path / "checkpoint.ckpt", Optimizer(problem, settings(2), "h", output=tmp_path))
    assert st.merits == two_steps.merits and st.hashes == two_steps.hashes
    assert np.array_equal(st.geometry.phi, two_steps.geometry.phi)


def test_run_artifacts(tmp_path, problem):
    Optimizer(problem, settings(1), "h", output=tmp_path).run(default_disk(problem))
    names = {p.name for p in tmp_path.iterdir()}
    assert {"checkpoint.ckpt", "merit_history.csv", "summary.json", "geometry_final.bin", "geometry_0000.bin",
            "geometry_0001.bin", "geometry_final.obj"} <= names
    lean = tmp_path / "lean"
    Optimizer(problem, settings(1), "h", output=lean, lean=True).run(default_disk(problem))
    assert {p.name for p in lean.iterdir()} == {"merit_history.csv", "summary.json", "geometry_final.bin",
                                                "geometry_final.bin.hdr", "geometry_final.obj"}
