import numpy as np
import pytest

from helpers import lp_transport_oracle, random_signature
from repbias.colorsig import ColorSignature, EmptySignatureError
from repbias.transport import (
    FlowPlan,
    TransportError,
    TransportProblem,
    emd,
    emd_1d_oracle,
    solve_transport,
)


def sig(weights, positions):
    return ColorSignature(np.array(weights, float), np.array(positions, float))


class TestEmd:
    def test_identity_is_exactly_zero(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            a = random_signature(rng, max_entries=32)
            assert emd(a, a) == 0.0

    def test_single_forced_flow(self):
        assert emd(sig([1.0], [0]), sig([1.0], [5])) == pytest.approx(5.0, abs=1e-12)

    def test_two_to_one(self):
        # frozen from the 2x1 transport polytope: the only feasible flow
        # ships 0.5 from each of positions 0 and 10 to position 5 -> cost 5
        a = sig([0.5, 0.5], [0, 10])
        b = sig([1.0], [5])
        assert emd(a, b) == pytest.approx(5.0, abs=1e-12)

    def test_empty_signature_rejected(self):
        with pytest.raises(EmptySignatureError):
            emd(ColorSignature(np.array([]), np.array([])), sig([1.0], [0]))

    def test_mass_mismatch_rejected(self):
        with pytest.raises(TransportError):
            emd(sig([1.0], [0]), sig([0.5], [0]))

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            a = random_signature(rng, max_entries=24)
            b = random_signature(rng, max_entries=24)
            assert abs(emd(a, b) - emd(b, a)) <= 1e-12

    def test_triangle_inequality(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            a, b, c = (random_signature(rng, max_entries=16) for _ in range(3))
            assert emd(a, c) <= emd(a, b) + emd(b, c) + 1e-9

    def test_permutation_invariance(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            a = random_signature(rng, max_entries=16)
            b = random_signature(rng, max_entries=16)
            perm = rng.permutation(len(b))
            shuffled = ColorSignature(b.weights[perm], b.positions[perm])
            assert emd(a, shuffled) == pytest.approx(emd(a, b), abs=1e-12)

    def test_bounded_by_position_span(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            a = random_signature(rng)
            b = random_signature(rng)
            assert 0.0 <= emd(a, b) <= 179.0


class TestOracle:
    def test_identity_zero(self):
        a = sig([0.25, 0.75], [3, 90])
        assert emd_1d_oracle(a, a) == 0.0

    def test_cdf_gap(self):
        assert emd_1d_oracle(sig([1.0], [0]), sig([1.0], [5])) == pytest.approx(5.0)

    def test_solver_agrees_with_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            a = random_signature(rng, max_entries=48)
            b = random_signature(rng, max_entries=48)
            assert abs(emd(a, b) - emd_1d_oracle(a, b)) <= 1e-9

    def test_oracle_handles_float_positions(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            ka, kb = rng.integers(1, 20, 2)
            a = ColorSignature(
                np.full(ka, 1.0 / ka), np.sort(rng.random(ka) * 100)
            )
            b = ColorSignature(
                np.full(kb, 1.0 / kb), np.sort(rng.random(kb) * 100)
            )
            assert abs(emd(a, b) - emd_1d_oracle(a, b)) <= 1e-9


class TestSolver:
    def test_one_by_one(self):
        plan = solve_transport(TransportProblem([1.0], [1.0], [[3.25]]))
        assert plan.flows == [(0, 0, 1.0)]
        assert plan.total_cost == pytest.approx(3.25, abs=1e-12)

    def test_diagonal_two_by_two(self):
        tp = TransportProblem([0.5, 0.5], [0.5, 0.5], [[0.0, 1.0], [1.0, 0.0]])
        plan = solve_transport(tp)
        assert plan.total_cost == pytest.approx(0.0, abs=1e-12)

    def test_random_problems_match_lp(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            m, n = rng.integers(1, 9, 2)
            s = rng.random(m) + 0.05
            d = rng.random(n) + 0.05
            d *= s.sum() / d.sum()
            cost = rng.random((m, n)) * 10
            plan = solve_transport(TransportProblem(s, d, cost))
            assert abs(plan.total_cost - lp_transport_oracle(s, d, cost)) <= 1e-8

    def test_plan_is_feasible_basic(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            m, n = rng.integers(2, 12, 2)
            s = rng.random(m) + 0.1
            d = rng.random(n) + 0.1
            d *= s.sum() / d.sum()
            cost = np.abs(rng.normal(size=(m, n))) * 5
            plan = solve_transport(TransportProblem(s, d, cost))
            assert len(plan.flows) <= m + n - 1
            row = np.zeros(m)
            col = np.zeros(n)
            for i, j, a in plan.flows:
                assert a > 0
                row[i] += a
                col[j] += a
            assert np.allclose(row, s, atol=1e-9)
            assert np.allclose(col, d, atol=1e-9)
            recomputed = sum(a * cost[i, j] for i, j, a in plan.flows)
            assert plan.total_cost == pytest.approx(recomputed, abs=1e-12)

    def test_unbalanced_rejected(self):
        with pytest.raises(TransportError):
            solve_transport(TransportProblem([1.0], [2.0], [[1.0]]))

    def test_nonpositive_weights_rejected(self):
        with pytest.raises(TransportError):
            solve_transport(TransportProblem([1.0, 0.0], [1.0], [[1.0], [1.0]]))

    def test_degenerate_equal_blocks(self):
        # many exact ties: classic degeneracy trap for naive simplex pivots
        m = 6
        s = np.full(m, 1.0 / m)
        cost = np.abs(np.subtract.outer(np.arange(m), np.arange(m))).astype(float)
        plan = solve_transport(TransportProblem(s, s, cost))
        assert plan.total_cost == pytest.approx(0.0, abs=1e-12)

    def test_solver_equals_oracle_on_1d_instances(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            a = random_signature(rng, max_entries=20)
            b = random_signature(rng, max_entries=20)
            cost = np.abs(a.positions[:, None] - b.positions[None, :])
            plan = solve_transport(TransportProblem(a.weights, b.weights, cost))
            assert plan.total_cost == pytest.approx(emd_1d_oracle(a, b), abs=1e-9)
