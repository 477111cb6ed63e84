import io
import math

import numpy as np
import pytest

from switchstab.automaton import accepts, entropy, perron_root, remove_edge
from switchstab.linalg import mat_exp, spectral_radius
from switchstab.models import (
    CosimConfig,
    CoupledLinearPair,
    PendulumParams,
    Simulator,
    SolverMethod,
    cosim_step_matrix,
    error_system,
    exact_solver,
    figure4_fixture,
    load_pendulum_mode_map,
    pendulum_candidate_configs,
    pendulum_instance,
    pendulum_pair,
    solver_matrix,
    stability_domain_grid,
    stability_function,
)

GOLDEN = (1 + math.sqrt(5)) / 2


# -- solvers -----------------------------------------------------------------


def test_solver_matrix_examples():
    assert solver_matrix("fe", 1.0, [[-1.0]]) == pytest.approx(np.array([[0.0]]))
    assert solver_matrix("md", 1.0, [[-1.0]]) == pytest.approx(np.array([[0.5]]))


def test_rk4_is_truncated_exponential():
    for z in (-2.5, -0.3, 0.1, 1.7):
        want = sum(z ** j / math.factorial(j) for j in range(5))
        assert solver_matrix("rk4", 1.0, [[z]])[0, 0] == pytest.approx(want, rel=1e-14)


def test_rk4_literal_coefficient_flag():
    z = -0.4
    lit = solver_matrix("rk4", 1.0, [[z]], literal_rk4=True)[0, 0]
    assert lit == pytest.approx(1 + z + z ** 2 / 12 + z ** 3 / 6 + z ** 4 / 24)
    assert lit != pytest.approx(solver_matrix("rk4", 1.0, [[z]])[0, 0])


def test_method_parsing():
    assert SolverMethod.parse("Euler") is SolverMethod.FORWARD_EULER
    assert SolverMethod.parse("rg") is SolverMethod.RUNGE_KUTTA4
    assert [m.order for m in SolverMethod] == [1, 2, 4]
    with pytest.raises(ValueError):
        SolverMethod.parse("bdf2")
    with pytest.raises(ValueError):
        solver_matrix("fe", 0.0, [[1.0]])


def test_solver_matrix_matches_stability_function():
    rng = np.random.default_rng(0)
    for method in SolverMethod:
        for _ in range(10):
            lam, h = rng.normal(), rng.uniform(0.01, 1.0)
            assert solver_matrix(method, h, [[lam]])[0, 0] == pytest.approx(
                stability_function(method, lam * h).real, rel=1e-12, abs=1e-14)


def test_solver_on_diagonal_matrix_uses_eigen_stability_function():
    lams = np.array([-3.0, -0.5, 0.2])
    h = 0.3
    for method in SolverMethod:
        mat = solver_matrix(method, h, np.diag(lams))
        assert np.allclose(np.diag(mat), stability_function(method, lams * h))


# -- error system --------------------------------------------------------------


def test_error_system_examples():
    es = error_system([[0.0]], [("fe", 0.1)])
    assert np.allclose(es.local_error[0], 0.0)
    a_bar = np.array([[0.0, 1.0], [-4.0, -0.4]])
    es = error_system(a_bar, [(m, h) for m in ("fe", "md", "rg") for h in (0.001, 0.002)])
    assert es.css.m == 6 and es.css.graph.m == 6
    for (m, h), a, err in zip(es.modes, es.css.modes, es.local_error):
        assert np.allclose(a - mat_exp(a_bar, h), err)


def test_alternating_steps_stabilise_forward_euler():
    # lambda = -10: h = 0.25 gives 1 - 2.5 = -1.5, h = 0.05 gives 0.5
    es = error_system([[-10.0]], [("fe", 0.25), ("fe", 0.05)])
    a1, a2 = es.css.modes
    assert spectral_radius(a1) > 1
    assert spectral_radius(a2 @ a1) < 1


# -- stability domain --------------------------------------------------------


def test_stability_domain_examples():
    grid = stability_domain_grid(["fe"], (-2.0, 0.0), (0.0, 0.0), resolution=3)
    mags = {x: m for x, y, m, st in grid.rows()}
    assert mags[-1.0] == pytest.approx(0.0)
    assert mags[-2.0] == pytest.approx(1.0)
    st = {x: s for x, y, m, s in grid.rows()}
    assert st[-1.0] and not st[-2.0]


def test_hybrid_method_region_extends_beyond_fe():
    ff = stability_domain_grid(["fe", "fe"], (-3, 1), (-2, 2), 81)
    mf = stability_domain_grid(["fe", "md"], (-3, 1), (-2, 2), 81)
    assert np.any(~ff.stable & mf.stable)


def test_stability_domain_csv():
    grid = stability_domain_grid(["md"], (-1, 0), (-1, 1), 2)
    buf = io.StringIO()
    grid.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "re,im,magnitude,stable"
    assert len(lines) == 5
    with pytest.raises(ValueError):
        stability_domain_grid(["fe"], resolution=1)


# -- co-simulation -----------------------------------------------------------


def decoupled_pair():
    a1 = np.array([[-1.0, 0.3], [0.0, -2.0]])
    a2 = np.array([[-0.5]])
    s1 = Simulator(a1, np.zeros((2, 1)), np.zeros((1, 2)), np.zeros((1, 1)))
    s2 = Simulator(a2, np.zeros((1, 1)), np.zeros((1, 1)), np.zeros((1, 1)))
    return CoupledLinearPair(s1, s2), a1, a2


def test_decoupled_cosim_is_block_diagonal():
    pair, a1, a2 = decoupled_pair()
    cfg = CosimConfig(("md", "fe"), (0.05, 0.1), 0.2)
    mat = cosim_step_matrix(pair, cfg)
    want = np.zeros((3, 3))
    want[:2, :2] = np.linalg.matrix_power(solver_matrix("md", 0.05, a1), 4)
    want[2:, 2:] = np.linalg.matrix_power(solver_matrix("fe", 0.1, a2), 2)
    assert np.allclose(mat, want)


def test_config_divisibility():
    assert CosimConfig(("fe", "fe"), (0.02, 0.1), 0.2).internal_steps() == (10, 2)
    with pytest.raises(ValueError):
        CosimConfig(("fe", "fe"), (0.03, 0.1), 0.2)
    with pytest.raises(ValueError):
        CosimConfig(("fe", "fe"), (0.3, 0.1), 0.2)


def test_feedthrough_of_second_simulator_is_rejected():
    s = Simulator(np.eye(1), np.eye(1), np.eye(1), np.eye(1))
    with pytest.raises(ValueError):
        CoupledLinearPair(s, s)


def test_zero_order_hold_keeps_input():
    pair = pendulum_pair()
    aug = pair.sim2.augmented()
    nx = pair.sim2.nx
    for method in SolverMethod:
        for h in (0.01, 0.1, 0.2):
            step = solver_matrix(method, h, aug)
            assert np.array_equal(step[nx:, :nx], np.zeros((1, nx)))
            assert np.array_equal(step[nx:, nx:], np.eye(1))


def test_exact_cosim_converges_to_coupled_flow():
    pair = pendulum_pair()
    mono = pair.monolithic()
    errs = []
    for H in (1e-2, 1e-3):
        cfg = CosimConfig(("fe", "fe"), (H, H), H)
        mat = cosim_step_matrix(pair, cfg, solver=exact_solver)
        errs.append(np.linalg.norm(mat - mat_exp(mono, H), 2))
    order = math.log10(errs[0] / errs[1])
    assert order >= 0.9


def test_pendulum_parameters():
    q = PendulumParams()
    assert q.p == pytest.approx(0.006 * 0.7 + 0.5 * 0.2 * 0.09)
    with pytest.raises(ValueError):
        PendulumParams(M=-1)


def test_pendulum_mode_examples():
    pair = pendulum_pair()
    stable = CosimConfig(("md", "md"), (0.01, 0.01), 0.1)
    assert spectral_radius(cosim_step_matrix(pair, stable)) < 1
    named = CosimConfig(("fe", "fe"), (0.2, 0.2), 0.2)
    assert spectral_radius(cosim_step_matrix(pair, named)) > 1


def test_controller_solver_is_irrelevant():
    pair = pendulum_pair()
    base = cosim_step_matrix(pair, CosimConfig(("fe", "md"), (0.01, 0.01), 0.1))
    for meth in ("md", "rk4"):
        for h in (0.02, 0.1):
            other = cosim_step_matrix(pair, CosimConfig((meth, "md"), (h, 0.01), 0.1))
            assert np.allclose(other, base)


def test_candidate_configs():
    cands = pendulum_candidate_configs()
    assert len(cands) == 14
    radii = [spectral_radius(cosim_step_matrix(pendulum_pair(), c)) for c in cands]
    assert sum(r > 1 for r in radii) == 6


def test_model_json_round_trip():
    pair = pendulum_pair()
    back = CoupledLinearPair.from_json(pair.to_json())
    assert np.allclose(back.monolithic(), pair.monolithic())
    cfg = CosimConfig(("fe", "md"), (0.02, 0.1), 0.2)
    assert CosimConfig.from_json(cfg.to_json()) == cfg


# -- pendulum instance ---------------------------------------------------------


def test_pendulum_instance():
    inst = pendulum_instance()
    radii = [spectral_radius(a) for a in inst.css.modes]
    assert len(radii) == 8
    assert [j + 1 for j, r in enumerate(radii) if r > 1] == [2, 3, 4]
    assert inst.mode_map["modes"] == [c.to_json() for c in inst.configs]


def test_mode_map_file_is_consistent():
    data = load_pendulum_mode_map()
    assert data["schema"] == "pendulum-modes/1"
    assert len(data["modes"]) == 8
    labels = {c.label for c in pendulum_candidate_configs()}
    assert {CosimConfig.from_json(m).label for m in data["modes"]} <= labels


def test_pendulum_degree_zero_entropy():
    g = pendulum_instance().css.graph
    for l in (2, 3, 4):
        g = remove_edge(g, ("q", "q", l))
    assert entropy(g) == pytest.approx(math.log2(5), abs=1e-12)


# -- fixture languages -------------------------------------------------------


def test_figure4_fixture():
    g = figure4_fixture()
    assert accepts(g, (2, 3, 4))
    assert perron_root(remove_edge(g, ("v2", "v3", 3))) == pytest.approx(GOLDEN, abs=1e-3)
    assert entropy(remove_edge(g, ("v2", "v3", 3))) == pytest.approx(math.log2(1.6180), abs=1e-3)
    assert entropy(remove_edge(g, ("v1", "v2", 2))) == 0.0
