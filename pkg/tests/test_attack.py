import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qkdlab.attack import (
    AttackSolution,
    NOMINAL,
    NORMAL_ARRIVAL,
    EfficiencyProfile,
    PenaltyPair,
    RemappedEnsemble,
    ResendSpec,
    build_penalty_bb84,
    build_penalty_sarg04,
    default_grid,
    fold_detector_error,
    min_qber,
    mirror,
    mismatch_profiles,
    optimal_curve,
    qber_of,
    solve_point,
    suboptimal_qber,
    transmittance_at,
)
from qkdlab.qmath import PlaneState, SymOp2, projector

from oracles import bb84_penalty, grid_min_ratio, ket, sarg04_penalty

BUILDERS = {"bb84": (build_penalty_bb84, bb84_penalty), "sarg04": (build_penalty_sarg04, sarg04_penalty)}

deltas = st.floats(min_value=1e-3, max_value=math.pi / 2)
thetas = st.floats(min_value=0.0, max_value=2 * math.pi)
etas = st.floats(min_value=0.01, max_value=1.0)


def arr(op: SymOp2) -> np.ndarray:
    return op.as_array()


def proj(theta):
    v = ket(theta)
    return np.outer(v, v)


class TestPenaltyOperators:
    @pytest.mark.parametrize("i", range(4))
    def test_bb84_nominal_resend(self, i):
        d = 0.37
        pair = build_penalty_bb84(RemappedEnsemble(d), NOMINAL[i])
        P = [proj(k * d) for k in range(4)]
        L = 0.5 * P[(i + 1) % 4] + P[(i + 2) % 4] + 0.5 * P[(i + 3) % 4]
        assert np.allclose(arr(pair.L), L, atol=1e-12)
        assert np.allclose(arr(pair.B), sum(P), atol=1e-12)

    @given(deltas, etas, etas)
    def test_bb84_fake_state_coefficients(self, d, e0, e1):
        # resend |-> with detector efficiencies (e0, e1)
        pair = build_penalty_bb84(RemappedEnsemble(d), PlaneState(1.5 * math.pi), EfficiencyProfile(e0, e1))
        P = [proj(k * d) for k in range(4)]
        L = 0.5 * e1 * P[0] + e1 * P[1] + 0.5 * e0 * P[2]
        B = 0.5 * (e0 + e1) * (P[0] + P[2]) + e1 * (P[1] + P[3])
        assert np.allclose(arr(pair.L), L, atol=1e-12)
        assert np.allclose(arr(pair.B), B, atol=1e-12)

    @pytest.mark.parametrize("protocol", ["bb84", "sarg04"])
    @given(d=deltas, t=thetas, e0=etas, e1=etas)
    def test_matches_enumeration(self, protocol, d, t, e0, e1):
        build, oracle = BUILDERS[protocol]
        pair = build(RemappedEnsemble(d), PlaneState(t), EfficiencyProfile(e0, e1))
        L, B = oracle(d, ket(t), (e0, e1))
        assert np.allclose(arr(pair.L), L, atol=1e-12)
        assert np.allclose(arr(pair.B), B, atol=1e-12)

    def test_uniform_click_at_quarter_turn(self):
        assert np.allclose(arr(RemappedEnsemble(math.pi / 2).density_sum()), 2 * np.eye(2), atol=1e-15)

    def test_small_delta_rank_one(self):
        pair = build_penalty_bb84(RemappedEnsemble(1e-8), NOMINAL[0])
        # coefficients of L and B sum to 2 and 4, all on |0><0|
        assert np.allclose(arr(pair.L), 2 * np.diag([1.0, 0.0]), atol=1e-7)
        assert np.allclose(arr(pair.B), 4 * np.diag([1.0, 0.0]), atol=1e-7)

    @pytest.mark.parametrize("protocol", ["bb84", "sarg04"])
    @given(d=deltas, t=thetas, e0=etas, e1=etas)
    def test_errors_bounded_by_clicks(self, protocol, d, t, e0, e1):
        build, _ = BUILDERS[protocol]
        pair = build(RemappedEnsemble(d), PlaneState(t), EfficiencyProfile(e0, e1))
        assert pair.L.is_psd() and pair.B.is_psd()
        assert pair.L.trace <= pair.B.trace + 1e-12
        assert (pair.B - pair.L).is_psd()

    @pytest.mark.parametrize("protocol", ["bb84", "sarg04"])
    @given(d=deltas, t=thetas, e0=etas, e1=etas)
    def test_mirror_reflects_operators(self, protocol, d, t, e0, e1):
        build, _ = BUILDERS[protocol]
        ens = RemappedEnsemble(d)
        first = (PlaneState(t), EfficiencyProfile(e0, e1))
        a = build(ens, *first)
        b = build(ens, *mirror(first))
        # reflection of the plane taking phi~_k to phi~_{3-k}
        c, s = math.cos(1.5 * d), math.sin(1.5 * d)
        R = np.array([[c, s], [s, -c]])
        assert np.allclose(arr(b.L), R @ arr(a.L) @ R, atol=1e-12)
        assert np.allclose(arr(b.B), R @ arr(a.B) @ R, atol=1e-12)


@st.composite
def penalty_pairs(draw):
    """Random PSD pair with 0 <= L <= B built from remapped-state-like projectors."""
    L = np.zeros((2, 2))
    B = np.zeros((2, 2))
    for _ in range(draw(st.integers(1, 4))):
        v = ket(draw(thetas))
        w = draw(st.floats(0.0, 1.0))
        f = draw(st.floats(0.0, 1.0))
        B += w * np.outer(v, v)
        L += f * w * np.outer(v, v)
    return PenaltyPair(SymOp2.from_array(L), SymOp2.from_array(B))


class TestMinQber:
    def test_zero_error_operator(self):
        pair = PenaltyPair(SymOp2.zero(), projector(PlaneState(0.0)))
        sol = min_qber([pair])
        assert sol.qber == 0.0
        v = sol.directions()[0]
        assert abs(v[1]) < 1e-12  # lies in the range of B

    def test_no_click_rejected(self):
        with pytest.raises(ValueError):
            min_qber([PenaltyPair(SymOp2.zero(), SymOp2.zero())])

    def test_support_restriction(self):
        ens = RemappedEnsemble(0.5)
        pairs = ResendSpec({i: (NOMINAL[i], NORMAL_ARRIVAL) for i in range(4)}).penalties(ens)
        sol = min_qber(pairs, support=(0, 3))
        assert set(sol.active) <= {0, 3}

    def test_povm_is_valid(self):
        sol = solve_point(0.3)
        total = SymOp2.zero()
        for m in sol.povm.values():
            assert m.is_psd()
            total = total + m
        assert (SymOp2.identity() - total).is_psd()

    @given(st.floats(1e-6, 1e3), st.floats(1e-6, 1e3), st.floats(1e-6, 1e3), st.floats(1e-6, 1e3))
    def test_mediant(self, a1, a2, b1, b2):
        if a1 / a2 > b1 / b2:
            a1, a2, b1, b2 = b1, b2, a1, a2
        m = (a1 + b1) / (a2 + b2)
        assert a1 / a2 <= m * (1 + 1e-12)
        assert m <= b1 / b2 * (1 + 1e-12)

    @settings(max_examples=1000, deadline=None)
    @given(st.lists(penalty_pairs(), min_size=1, max_size=4),
           st.lists(st.tuples(thetas, st.floats(0.0, 1.0)), min_size=4, max_size=4))
    def test_no_povm_beats_the_solver(self, pairs, elements):
        pairs = {i: p for i, p in enumerate(pairs) if p.B.trace > 1e-6}
        if not pairs:
            return
        sol = min_qber(pairs)
        povm = {i: projector(PlaneState(t)).scale(w) for i, (t, w) in zip(pairs, elements)}
        den = sum(np.trace(arr(povm[i]) @ arr(pairs[i].B)) for i in povm)
        if den <= 1e-9:
            return
        assert qber_of(povm, pairs) >= sol.qber - 1e-9

    def test_agrees_with_grid_oracle(self):
        rng = np.random.default_rng(20240601)
        builders = {"bb84": build_penalty_bb84, "sarg04": build_penalty_sarg04}
        for _ in range(200):
            protocol = ["bb84", "sarg04"][int(rng.integers(2))]
            d = float(rng.uniform(1e-3, math.pi / 2))
            ens = RemappedEnsemble(d)
            prof = mismatch_profiles(float(rng.uniform(0.02, 1.0)))[int(rng.integers(3))]
            outcomes = rng.choice(4, size=int(rng.integers(1, 5)), replace=False)
            pairs = {int(i): builders[protocol](ens, PlaneState(float(rng.uniform(0, 2 * math.pi))), prof)
                     for i in outcomes}
            got = min_qber(pairs).qber
            ref = grid_min_ratio([(arr(p.L), arr(p.B)) for p in pairs.values()])
            assert got <= ref + 1e-12
            assert got >= ref - 1e-6

    @given(deltas, etas)
    @settings(max_examples=40, deadline=None)
    def test_common_scale_invariance(self, d, c):
        ens = RemappedEnsemble(d)
        prof = EfficiencyProfile(1.0, 0.3)
        scaled = EfficiencyProfile(c, 0.3 * c)
        a = min_qber({0: build_penalty_bb84(ens, NOMINAL[3], prof)})
        b = min_qber({0: build_penalty_bb84(ens, NOMINAL[3], scaled)})
        assert b.qber == pytest.approx(a.qber, rel=1e-9)
        assert b.conclusive_prob == pytest.approx(c * a.conclusive_prob, rel=1e-9)


class TestCurves:
    @pytest.mark.parametrize("protocol,mode,m,expected", [
        ("bb84", "fixed", 1.0, 0.15505),
        ("bb84", "optimized", 1.0, 0.14645),
        ("bb84", "fixed", 0.08, 0.10121),
        ("bb84", "optimized", 0.08, 0.05787),
        ("sarg04", "fixed", 1.0, 0.23670),
        ("sarg04", "fixed", 0.08, 0.11611),
        ("sarg04", "optimized", 1.0, 0.22654),
        ("sarg04", "optimized", 0.08, 0.11298),
    ])
    def test_small_step_values(self, protocol, mode, m, expected):
        assert solve_point(1e-3, protocol, mode, m).qber == pytest.approx(expected, abs=1e-5)

    def test_quarter_turn_bb84(self):
        assert solve_point(math.pi / 2).qber == pytest.approx(0.25, abs=1e-12)
        assert solve_point(math.pi / 2, mode="optimized").qber == pytest.approx(0.25, abs=1e-9)
        assert solve_point(math.pi / 2, mismatch=0.08).qber == pytest.approx(0.12346, abs=1e-5)
        assert solve_point(math.pi / 2, mode="optimized", mismatch=0.08).qber == pytest.approx(0.09822, abs=1e-5)

    def test_quarter_turn_sarg04_nominal_resend(self):
        d = math.pi / 2
        L, B = sarg04_penalty(d, ket(0.0), (1.0, 1.0))
        ref = grid_min_ratio([(L, B)])
        got = min_qber({0: build_penalty_sarg04(RemappedEnsemble(d), NOMINAL[0])}).qber
        assert got == pytest.approx(ref, abs=1e-9)
        assert got == pytest.approx(1 / 3, abs=1e-12)

    @pytest.mark.parametrize("protocol", ["bb84", "sarg04"])
    def test_dominance(self, protocol):
        grid = default_grid(16)
        fixed = optimal_curve(protocol, "fixed", 1.0, grid)
        opt = optimal_curve(protocol, "optimized", 1.0, grid)
        fixed_m = optimal_curve(protocol, "fixed", 0.08, grid)
        opt_m = optimal_curve(protocol, "optimized", 0.08, grid)
        for a, b, c, e in zip(fixed, opt, fixed_m, opt_m):
            assert b.qber <= a.qber + 1e-9
            assert e.qber <= c.qber + 1e-9
            assert e.qber <= b.qber + 1e-9

    def test_empty_grid(self):
        with pytest.raises(ValueError):
            optimal_curve("bb84", "fixed", 1.0, [])


class TestTransmittance:
    def test_zero_povm(self):
        sol = AttackSolution(0.0, {}, 0.0, 0.0, 0.0, ())
        assert transmittance_at(0.4, sol) == 0.0

    def test_single_outcome_quarter_turn(self):
        d = math.pi / 2
        sol = min_qber({0: build_penalty_bb84(RemappedEnsemble(d), NOMINAL[0])})
        assert transmittance_at(d, sol) == pytest.approx(0.5, abs=1e-12)

    def test_near_twentieth_turn(self):
        d = math.pi / 20 * 1.01
        sol = solve_point(d)
        assert sol.qber == pytest.approx(0.1559, abs=1e-4)
        assert transmittance_at(d, sol) == pytest.approx(0.0111, abs=1e-4)

    @given(deltas)
    @settings(max_examples=30, deadline=None)
    def test_is_probability(self, d):
        t = transmittance_at(d, solve_point(d))
        assert 0.0 <= t <= 1.0 + 1e-12


class TestSuboptimal:
    def test_small_step_limit(self):
        assert suboptimal_qber(1e-3) == pytest.approx(1 / 6, abs=1e-4)

    def test_explicit_projectors(self):
        d = 0.1
        psi = np.array([-math.sin(d), math.cos(d)])  # orthogonal to phi~_2
        P = [proj(k * d) for k in range(4)]
        L = 0.5 * P[1] + P[2] + 0.5 * P[3]
        B = sum(P)
        assert suboptimal_qber(d) == pytest.approx((psi @ L @ psi) / (psi @ B @ psi), rel=1e-12)

    def test_never_below_optimal(self):
        for d in default_grid(40):
            assert suboptimal_qber(d) >= solve_point(d).qber - 1e-12


class TestDetectorError:
    @given(st.floats(0.0, 0.5), st.floats(0.0, 0.5))
    def test_properties(self, e1, ed):
        assert fold_detector_error(e1, 0.0) == e1
        assert fold_detector_error(0.0, ed) == ed
        assert fold_detector_error(0.5, ed) == pytest.approx(0.5)
        assert 0.0 <= fold_detector_error(e1, ed) <= 0.5 + 1e-15


class TestProfiles:
    def test_mismatch_profiles(self):
        n, t0, t1 = mismatch_profiles(0.1, 0.5)
        assert (n.eta0, n.eta1) == (0.5, 0.5)
        assert (t0.eta0, t0.eta1) == (0.5, 0.05)
        assert t1 == t0.swapped()

    @pytest.mark.parametrize("bad", [(0.0, 1.0), (1.0, 1.5)])
    def test_validation(self, bad):
        with pytest.raises(ValueError):
            EfficiencyProfile(*bad)

    def test_delta_validation(self):
        with pytest.raises(ValueError):
            RemappedEnsemble(0.0)
        with pytest.raises(ValueError):
            RemappedEnsemble(2.0)
