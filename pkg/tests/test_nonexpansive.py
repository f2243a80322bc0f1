import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from modfix import Domain, Mapping
from modfix.errors import PreconditionError, SolverError
from modfix.modular import OrliczGenerator, ModularFunctional, check_regular_growth, power_modular
from modfix.nonexpansive import (
    Schedule,
    approximating_sequence,
    certify_nonexpansive,
    proposition31_solve,
    schauder_fixed_point,
    solve_segment,
)
from modfix.problems import make_rotation_map, segment_closed_form

GRID = np.linspace(0.0, 0.99, 34)


@pytest.fixture(scope="module")
def growth2():
    return check_regular_growth(power_modular(2, 2.0), GRID)


@pytest.fixture
def quarter_turn():
    return make_rotation_map(math.pi / 2, [1.0, 0.0])


class TestSchedule:
    def test_rules(self):
        assert Schedule.from_rule("harmonic", 3).values == pytest.approx((1 / 2, 2 / 3, 3 / 4))
        assert Schedule.from_rule("dyadic", 3).values == (0.5, 0.75, 0.875)
        assert Schedule.from_rule("decimal", 2).values == pytest.approx((0.9, 0.99))

    @pytest.mark.parametrize("vals", [(), (0.5, 0.5), (0.6, 0.4), (0.0, 0.5), (0.5, 1.0)])
    def test_invalid(self, vals):
        with pytest.raises(PreconditionError):
            Schedule(vals)

    @given(st.sampled_from(["harmonic", "dyadic", "decimal"]), st.integers(1, 15))
    def test_strictly_increasing(self, rule, n):
        v = Schedule.from_rule(rule, n).values
        assert all(0 < a < b < 1 for a, b in zip(v, v[1:])) and 0 < v[0] < 1

    def test_roundtrip(self):
        for s in (Schedule.from_rule("dyadic", 4), Schedule((0.3, 0.6))):
            assert Schedule.from_dict(s.to_dict()) == s


class TestCertifyNonexpansive:
    def test_rotation_isometry(self, rho2, quarter_turn):
        rep = certify_nonexpansive(quarter_turn, rho2, 500, 0)
        assert rep.passed and abs(rep.margin) < 1e-9

    def test_half_map(self, rho2):
        rep = certify_nonexpansive(Mapping(lambda x: 0.5 * x, Domain.whole_space(2)), rho2, 200, 0)
        assert rep.passed and rep.margin < 0

    def test_doubling(self, rho2):
        rep = certify_nonexpansive(Mapping(lambda x: 2.0 * x, Domain.whole_space(2)), rho2, 200, 0)
        assert not rep.passed and rep.margin > 0 and rep.witness is not None


class TestSegment:
    def test_quarter_turn(self, rho2, quarter_turn, growth2):
        x = solve_segment(quarter_turn, np.zeros(2), 0.5, rho2, growth2, 1e-24)
        assert x == pytest.approx([0.4, 0.2], abs=1e-11)

    def test_identity(self, rho2, growth2):
        T = Mapping(lambda x: x.copy(), Domain.whole_space(2))
        assert solve_segment(T, np.zeros(2), 0.7, rho2, growth2, 1e-20) == pytest.approx([0, 0], abs=1e-10)

    def test_constant(self, rho2, growth2):
        w = np.array([3.0, -2.0])
        z = np.array([1.0, 1.0])
        T = Mapping(lambda x: w, Domain.whole_space(2))
        x = solve_segment(T, z, 0.3, rho2, growth2, 1e-20)
        assert x == pytest.approx(0.7 * z + 0.3 * w, abs=1e-12)

    def test_regular_growth_required(self, quarter_turn):
        g = OrliczGenerator.piecewise([(0.0, 0.0), (0.5, 1.0), (10.0, 1.0)])
        rho = ModularFunctional([1.0, 1.0], [g, g])
        prof = check_regular_growth(rho, [0.5, 0.99])
        with pytest.raises(PreconditionError):
            solve_segment(quarter_turn, np.zeros(2), 0.5, rho, prof, 1e-10)

    def test_growth_violated_at_point(self, rho2, quarter_turn, growth2):
        bad = growth2.__class__(**{**growth2.__dict__, "samples": growth2.samples})
        object.__setattr__(bad, "rho", ModularFunctional(
            [1.0, 1.0], [OrliczGenerator.piecewise([(0.0, 0.0), (0.5, 1.0), (10.0, 1.0)])] * 2))
        with pytest.raises(SolverError, match="regular growth violated"):
            solve_segment(quarter_turn, np.zeros(2), 0.9, rho2, bad, 1e-10)

    @given(st.floats(0.05, 0.95), st.floats(0, 2 * math.pi), st.floats(-3, 3), st.floats(-3, 3))
    def test_residual_property(self, beta, theta, b0, b1):
        rho = power_modular(2, 2.0)
        prof = check_regular_growth(rho, GRID, 100)
        T = make_rotation_map(theta, [b0, b1])
        z = np.array([0.5, -0.5])
        tol = 1e-14
        x = solve_segment(T, z, beta, rho, prof, tol)
        assert rho(x - ((1 - beta) * z + beta * T(x))) <= max(tol, 1e-26)


class TestApproximatingSequence:
    def test_quarter_turn_rows(self, rho2, quarter_turn, growth2):
        sched = Schedule.from_rule("dyadic", 6)
        tr = approximating_sequence(quarter_turn, np.zeros(2), sched, rho2, growth2, 1e-24)
        R, b = quarter_turn.affine
        for k, x in zip(tr.k, tr.points):
            assert x == pytest.approx(segment_closed_form(R, b, np.zeros(2), k), abs=1e-10)
        assert tr.compliant
        assert np.all(np.diff(tr.residual) <= 0)
        assert tr.tau_bounded()

    def test_identity(self, rho2, growth2):
        T = Mapping(lambda x: x.copy(), Domain.whole_space(2))
        tr = approximating_sequence(T, np.zeros(2), Schedule.from_rule("harmonic", 4), rho2, growth2, 1e-20)
        assert np.all(tr.points == 0) and np.all(tr.residual == 0)

    def test_failure_names_index(self, rho2, quarter_turn, growth2):
        with pytest.raises(SolverError, match="n=1") as exc:
            approximating_sequence(quarter_turn, np.zeros(2), Schedule.from_rule("dyadic", 3), rho2, growth2, 1e-24,
                                   max_iter=3)
        assert exc.value.trace is not None and len(exc.value.trace) == 0


class TestSchauder:
    def test_quarter_turn(self, rho2, quarter_turn, growth2):
        res = schauder_fixed_point(quarter_turn, None, Schedule.from_rule("dyadic", 11), rho2, growth2, 1e-6)
        assert res.converged
        assert rho2(res.point - np.array([0.5, 0.5])) <= 1e-6
        assert res.info["estimate_holds"]
        assert any("compactness" in n for n in res.notes)

    def test_segment_of_fixed_points(self, rho2, growth2):
        # projection onto the first axis, clipped to [-1, 1]: every point of the segment is fixed
        dom = Domain.box([-1.0, -1.0], [1.0, 1.0], star_center=[0.0, 0.0])
        T = Mapping(lambda x: np.array([x[0], 0.0]), dom)
        res = schauder_fixed_point(T, None, Schedule.from_rule("harmonic", 5), rho2, growth2, 1e-12)
        y = res.point
        assert res.converged and rho2(T(y) - y) == 0.0

    def test_translation_rejected(self, rho2, growth2):
        T = Mapping(lambda x: x + np.array([1.0, 0.0]), Domain.whole_space(2))
        with pytest.raises(SolverError, match="compactness surrogate violated") as exc:
            schauder_fixed_point(T, None, Schedule.from_rule("dyadic", 8), rho2, growth2, 1e-6)
        assert exc.value.trace is not None and len(exc.value.trace) == 8

    def test_translation_closed_form(self, rho2, growth2):
        # x_n = k_n/(1-k_n) e1 grows without bound
        T = Mapping(lambda x: x + np.array([1.0, 0.0]), Domain.whole_space(2))
        sched = Schedule.from_rule("dyadic", 5)
        tr = approximating_sequence(T, np.zeros(2), sched, rho2, growth2, 1e-20)
        k = np.array(sched.values)
        assert tr.points[:, 0] == pytest.approx(k / (1 - k), rel=1e-9)

    def test_needs_center(self, rho2, quarter_turn, growth2):
        dom = Domain(2, closed=True, star_center=None)
        with pytest.raises(PreconditionError):
            schauder_fixed_point(quarter_turn, dom, Schedule.from_rule("dyadic", 3), rho2, growth2, 1e-6)


def convex_half_shift():
    b = np.array([1.0, 0.0])
    return Mapping(lambda x: 0.5 * x + b, Domain(2, convex=True, star_center=np.zeros(2)))


DECIMAL = Schedule(tuple([1 - 10.0**-n for n in range(1, 8)] + [1 - 1e-9]))


class TestProposition:
    def test_closed_form(self):
        rho = power_modular(2, 1.0)
        res = proposition31_solve(convex_half_shift(), rho, 0.5, DECIMAL, 1e-8)
        lam = np.array(DECIMAL.values)
        assert res.info["points"][:, 0] == pytest.approx(lam / (1 - 0.5 * lam), rel=1e-9)
        assert res.info["pairs_compliant"] and res.converged
        assert res.point == pytest.approx([2.0, 0.0], abs=1e-8)

    def test_pair_bound_at_09_099(self):
        rho = power_modular(2, 1.0)
        res = proposition31_solve(convex_half_shift(), rho, 0.5, Schedule((0.9, 0.99)), 1e-8)
        pairs = res.info["pairs"]
        sup = res.info["sup"]
        assert pairs.rhs[0] == pytest.approx(0.09 / (0.99 * 0.5) * sup)
        assert pairs.lhs[0] == pytest.approx(0.99 / 0.505 - 0.9 / 0.55, rel=1e-9)
        assert pairs.lhs[0] <= pairs.rhs[0]

    def test_zero_map(self):
        rho = power_modular(2, 1.0)
        T = Mapping(lambda x: np.zeros(2), Domain(2, convex=True))
        res = proposition31_solve(T, rho, 0.5, Schedule.from_rule("decimal", 4), 1e-8)
        assert np.all(res.point == 0) and res.converged

    def test_sup_cap(self):
        rho = power_modular(2, 1.0)
        with pytest.raises(SolverError, match="not observed"):
            proposition31_solve(convex_half_shift(), rho, 0.5, DECIMAL, 1e-8, sup_cap=1.0)

    def test_preconditions(self, rho2):
        with pytest.raises(PreconditionError):
            proposition31_solve(convex_half_shift(), power_modular(2, 0.5), 0.5, DECIMAL, 1e-8)
        with pytest.raises(PreconditionError):
            proposition31_solve(Mapping(lambda x: 0.5 * x, Domain(2)), rho2, 0.5, DECIMAL, 1e-8)
        with pytest.raises(PreconditionError):
            proposition31_solve(convex_half_shift(), rho2, 1.0, DECIMAL, 1e-8)

    @given(st.floats(0.1, 0.9), st.floats(-3, 3))
    def test_pairs_hold_property(self, k, shift):
        rho = power_modular(2, 1.0)
        b = np.array([shift, 1.0])
        T = Mapping(lambda x: k * x + b, Domain(2, convex=True))
        res = proposition31_solve(T, rho, k, Schedule.from_rule("decimal", 5), 1e-3)
        assert res.info["pairs_compliant"]
