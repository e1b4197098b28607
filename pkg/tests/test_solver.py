import math

import numpy as np
import pytest

from sl1 import core, solver
from sl1.generators import make_instance
from sl1.rng import RngSpec, Stream

from oracles import lp_min_by_vertex_enumeration, project_l1_ball_bisection


def _random_instance(seed, n_max=12, m_max=12):
    st = Stream(RngSpec(9000 + seed))
    n = 3 + st.integer_below(n_max - 2)
    m = 3 + st.integer_below(m_max - 2)
    k = 1 + st.integer_below(min(3, n))
    s = 1 + st.integer_below(max(1, m // 3))
    return make_instance(n, m, k, {"kind": "sparse", "s": s, "scale": 1.0},
                         {"kind": "sparse", "amplitude": "gaussian"},
                         RngSpec(7000 + seed))


class TestProx:
    def test_soft_threshold_examples(self):
        assert np.array_equal(solver.soft_threshold([3, -1], 1.0), [2, 0])
        v = np.array([0.5, -2.0, 0.0])
        assert np.array_equal(solver.soft_threshold(v, 0.0), v)
        assert np.array_equal(solver.soft_threshold(v, 2.0), np.zeros(3))

    def test_soft_threshold_uses_math_sign(self):
        # sign(0) = 0 here, unlike core.sign_vec
        assert solver.soft_threshold([0.0], 0.0)[0] == 0.0

    def test_negative_tau_rejected(self):
        with pytest.raises(ValueError):
            solver.soft_threshold([1.0], -0.1)

    def test_project_examples(self):
        assert np.array_equal(solver.project_l1_ball([3.0, 0.0], 1.0), [1.0, 0.0])
        assert np.array_equal(solver.project_l1_ball([0.2, 0.3], 1.0), [0.2, 0.3])
        assert solver.project_l1_ball([1.0, 1.0], 1.0) == pytest.approx([0.5, 0.5])

    def test_project_zero_radius(self):
        assert np.array_equal(solver.project_l1_ball([1.0, -2.0], 0.0), [0.0, 0.0])

    def test_project_negative_radius_rejected(self):
        with pytest.raises(ValueError):
            solver.project_l1_ball([1.0], -1.0)

    def test_project_matches_bisection_oracle(self):
        st = Stream(RngSpec(11))
        for _ in range(40):
            dim = 1 + st.integer_below(12)
            v = 3.0 * st.normal(dim)
            radius = float(np.abs(st.normal(1))[0]) + 0.01
            fast = solver.project_l1_ball(v, radius)
            slow = project_l1_ball_bisection(v, radius)
            assert fast == pytest.approx(slow, abs=1e-9)
            assert core.norm_lp(fast, 1) <= radius * (1 + 1e-12)


class TestOperatorNorm:
    def test_identity(self):
        assert solver.operator_norm_estimate(np.eye(4)) == pytest.approx(1.0, abs=1e-10)

    def test_known_spectrum(self):
        assert solver.operator_norm_estimate(np.diag([3.0, 1.0])) == pytest.approx(3.0, abs=1e-6)

    def test_never_exceeds_frobenius_and_close_to_svd(self):
        st = Stream(RngSpec(12))
        for _ in range(10):
            a = st.normal(12 * 7).reshape(12, 7)
            est = solver.operator_norm_estimate(a)
            fro = float(np.sqrt((a * a).sum()))
            top = float(np.linalg.svd(a, compute_uv=False)[0])
            assert est <= fro + 1e-12
            assert est <= top + 1e-12
            assert est >= 0.99 * top


class TestLpFormulation:
    def test_counts(self):
        lp = solver.lp_formulate(np.eye(1), [1.0], 0.5)
        assert lp.num_vars == 3       # u+, u-, t
        assert lp.num_rows == 3       # two absolute-value rows + budget row

    def test_round_trip_against_vertex_enumeration(self):
        for seed in range(8):
            inst = _random_instance(seed, n_max=3, m_max=3)
            lp = solver.lp_formulate(inst.phi, inst.y, inst.epsilon)
            oracle, _ = lp_min_by_vertex_enumeration(lp.c, lp.a_ub, lp.b_ub)
            res = solver.solve_lp_exact(lp)
            assert res.status == "optimal"
            assert res.objective == pytest.approx(oracle, abs=1e-9)

    def test_zero_epsilon_square_invertible(self):
        st = Stream(RngSpec(13))
        phi = st.normal(9).reshape(3, 3)
        x = np.array([0.5, -1.0, 2.0])
        y = phi @ x
        res = solver.solve_lp_exact(solver.lp_formulate(phi, y, 0.0))
        assert res.status == "optimal"
        assert res.u_star == pytest.approx(x, abs=1e-9)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            solver.lp_formulate(np.eye(2), [1.0, 2.0, 3.0], 0.1)
        with pytest.raises(ValueError):
            solver.lp_formulate(np.eye(2), [1.0, 2.0], -0.1)


class TestLpExact:
    def test_zero_solution_when_budget_covers_y(self):
        st = Stream(RngSpec(14))
        phi = st.normal(8).reshape(2, 4)
        y = np.array([0.1, -0.2])
        res = solver.solve_lp_exact(solver.lp_formulate(phi, y, 1.0))
        assert res.status == "optimal"
        assert res.objective == 0.0
        assert np.array_equal(res.u_star, np.zeros(4))

    def test_identity_zero_epsilon(self):
        y = np.array([1.0, -2.0, 0.5])
        res = solver.solve_lp_exact(solver.lp_formulate(np.eye(3), y, 0.0))
        assert res.status == "optimal"
        assert res.u_star == pytest.approx(y, abs=1e-12)

    def test_feasibility_of_results(self):
        for seed in range(10):
            inst = _random_instance(seed)
            res = solver.solve_lp_exact(solver.lp_formulate(inst.phi, inst.y, inst.epsilon))
            assert res.status == "optimal"
            assert res.residual_l1 <= inst.epsilon + 1e-8
            # the truth is feasible, so the optimum cannot exceed it
            assert res.objective <= core.norm_lp(inst.x, 1) + 1e-9


class TestFirstOrder:
    def test_zero_solution_fast_path(self):
        st = Stream(RngSpec(15))
        phi = st.normal(8).reshape(2, 4)
        y = np.array([0.1, -0.2])
        res = solver.solve_first_order(phi, y, 1.0)
        assert res.status == "optimal"
        assert res.objective == 0.0

    def test_agreement_with_lp_oracle(self):
        for seed in range(12):
            inst = _random_instance(seed)
            lp = solver.solve_lp_exact(solver.lp_formulate(inst.phi, inst.y, inst.epsilon))
            fo = solver.solve_first_order(inst.phi, inst.y, inst.epsilon)
            assert fo.status == "optimal"
            assert abs(fo.objective - lp.objective) <= 1e-6 * (1.0 + lp.objective)
            assert fo.residual_l1 <= inst.epsilon + 1e-8

    def test_noiseless_overdetermined_recovers_truth(self):
        inst = make_instance(10, 14, 2, {"kind": "none"},
                             {"kind": "sparse", "amplitude": "gaussian"}, RngSpec(16))
        res = solver.solve_first_order(inst.phi, inst.y, 0.0)
        assert res.status == "optimal"
        assert core.norm_lp(res.u_star - inst.x, 2) <= 1e-5

    def test_iteration_limit_status(self):
        inst = _random_instance(3)
        config = solver.SolverConfig(max_iters=3)
        res = solver.solve_first_order(inst.phi, inst.y, inst.epsilon, config)
        assert res.status == "iteration-limit"

    def test_best_objective_non_increasing(self):
        inst = _random_instance(5)
        config = solver.SolverConfig(step_params={"record_history": True})
        res = solver.solve_first_order(inst.phi, inst.y, inst.epsilon, config)
        best = [h["best_objective"] for h in res.certificate["history"]
                if h["best_objective"] is not None]
        assert all(b1 >= b2 - 1e-15 for b1, b2 in zip(best, best[1:]))

    def test_scaling_covariance(self):
        inst = _random_instance(6)
        base = solver.solve_first_order(inst.phi, inst.y, inst.epsilon)
        scaled = solver.solve_first_order(inst.phi, 3.0 * inst.y, 3.0 * inst.epsilon)
        assert scaled.objective == pytest.approx(3.0 * base.objective, rel=1e-5)

    def test_scaling_covariance_lp(self):
        inst = _random_instance(7)
        base = solver.solve_lp_exact(solver.lp_formulate(inst.phi, inst.y, inst.epsilon))
        scaled = solver.solve_lp_exact(
            solver.lp_formulate(inst.phi, 2.0 * inst.y, 2.0 * inst.epsilon))
        assert scaled.objective == pytest.approx(2.0 * base.objective, rel=1e-9)


class TestLpStatusMapping:
    def test_pivot_limit_with_feasible_basis_is_feasible_suboptimal(self):
        inst = _random_instance(8, n_max=25, m_max=25)
        lp = solver.lp_formulate(inst.phi, inst.y, inst.epsilon)
        full = solver.solve_lp_exact(lp)
        assert full.iters > 10  # the tiny budget below cannot finish
        res = solver.solve_lp_exact(lp, solver.SolverConfig(
            method="lp-exact", max_iters=1))
        if res.status == "feasible-suboptimal":
            assert res.residual_l1 <= inst.epsilon + 1e-8
            assert res.objective >= full.objective - 1e-9
        else:  # ran out inside phase 1
            assert res.status == "iteration-limit"

    def test_unbounded_reduction_rejected(self):
        lp = solver.lp_formulate(np.eye(2), [1.0, 1.0], 0.5)
        lp.c = -np.ones_like(lp.c)   # deliberately malformed objective
        with pytest.raises(ValueError):
            solver.solve_lp_exact(lp)


class TestResultSerialization:
    def test_json_round_trip(self):
        inst = _random_instance(8)
        res = solver.solve_first_order(inst.phi, inst.y, inst.epsilon)
        doc = res.to_json_dict()
        assert set(doc) >= {"objective", "residual_l1", "status", "iters", "u_star"}
        back = solver.SolverResult.from_json_dict(doc)
        assert np.array_equal(back.u_star, res.u_star)
        assert back.objective == res.objective
        assert back.status == res.status

    def test_config_validation(self):
        with pytest.raises(ValueError):
            solver.SolverConfig(feasibility_tol=0.0)
        with pytest.raises(ValueError):
            solver.SolverConfig(method="newton")
