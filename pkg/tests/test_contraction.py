import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from modfix import Domain, Mapping
from modfix.contraction import (
    StrictContractionCertificate,
    StrongContractionCertificate,
    certify_strict,
    certify_strong,
    conjugate_exponent,
    contraction_ratio,
    corollary_reduction,
    residual,
    select_power,
    solve_strict_delta2,
    solve_strong,
)
from modfix.errors import CertificationError, PreconditionError, SolverError
from modfix.modular import Delta2Certificate, ModularFunctional, OrliczGenerator, estimate_delta2, power_modular


def linear(A, b, name="T"):
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    return Mapping(lambda x: A @ x + b, Domain.whole_space(b.size), name, affine=(A, b))


class TestCertifyStrong:
    def test_half_map(self, rho2):
        T = linear(0.5 * np.eye(2), [0, 0])
        cert = certify_strong(T, rho2, 1.2, 1.0, 1000, 0)
        assert cert.k_hat == pytest.approx(0.36, rel=1e-12)
        assert cert.k == pytest.approx(0.36 * 1.01, rel=1e-12)

    def test_identity_rejected(self, rho2):
        with pytest.raises(CertificationError) as exc:
            certify_strong(linear(np.eye(2), [0, 0]), rho2, 1.5, 1.0, 100, 0)
        assert exc.value.witness["ratio"] == pytest.approx(2.25)

    def test_constant_map(self, rho2):
        cert = certify_strong(linear(np.zeros((2, 2)), [3, 4]), rho2, 2.0, 1.0, 100, 0)
        assert cert.k_hat == 0.0

    def test_c_not_above_l(self, rho2):
        with pytest.raises(PreconditionError):
            certify_strong(linear(0.5 * np.eye(2), [0, 0]), rho2, 1.0, 1.0)

    def test_zero_numerator_gives_zero(self, rho2):
        T = Mapping(lambda x: np.array([x[0] ** 2, 0.0]), Domain.whole_space(2))
        pairs = (np.array([[1.0, 0.0]]), np.array([[-1.0, 0.0]]))
        assert contraction_ratio(T, rho2, 2.0, 1.0, pairs=pairs)[0] == 0.0

    def test_zero_denominator_rejected(self):
        # generator vanishes on [0, 1], so rho(l(x-y)) = 0 while rho(c(Tx-Ty)) > 0
        g = OrliczGenerator.piecewise([(0.0, 0.0), (1.0, 0.0), (2.0, 1.0)])
        rho = ModularFunctional([1.0], [g])
        T = Mapping(lambda x: 10.0 * x, Domain.whole_space(1))
        with pytest.raises(CertificationError) as exc:
            contraction_ratio(T, rho, 2.0, 1.0, pairs=(np.array([[0.5]]), np.array([[0.0]])))
        assert exc.value.witness["numerator"] > 0

    def test_strict(self, rho2):
        cert = certify_strict(linear(0.5 * np.eye(2), [1, 0]), rho2, 1.0, 200, 0)
        assert cert.k_hat == pytest.approx(0.25)

    @given(st.floats(1.0, 1.5), st.floats(0.0, 0.3), st.floats(0.0, 0.2))
    def test_relaxed_constants_still_pass(self, l0_rel, dc, dk):
        # (c, k, l) = (2, 0.4*4/1, ...) certified; loosen l up and c down within l <= l0 < c0 <= c
        rho = power_modular(3, 2.0)
        T = linear(0.25 * np.eye(3), [1, 2, 3])
        rng = np.random.default_rng(3)
        pairs = (rng.normal(size=(100, 3)), rng.normal(size=(100, 3)))
        c, l = 2.0, 1.0
        k, _ = contraction_ratio(T, rho, c, l, pairs=pairs)
        l0, c0 = l * l0_rel, c - dc
        k0 = min(k + dk, 0.999)
        assert l <= l0 < c0 <= c
        k_relaxed, _ = contraction_ratio(T, rho, c0, l0, pairs=pairs)
        assert k_relaxed <= k0


class TestConjugateExponent:
    def test_plain(self):
        assert conjugate_exponent(StrongContractionCertificate(1.2, 1.0, 0.5)) == pytest.approx(6.0)
        assert conjugate_exponent(StrongContractionCertificate(2.0, 1.0, 0.5)) == pytest.approx(2.0)

    def test_s_convex(self):
        cert = StrongContractionCertificate(2.0, 1.0, 0.5, s=0.5)
        a = conjugate_exponent(cert)
        assert a == pytest.approx(11.65685424949238, rel=1e-12)
        assert abs(0.5**0.5 + a**-0.5 - 1.0) < 1e-12

    @given(st.floats(0.1, 10), st.floats(1.01, 5), st.floats(0.05, 1.0))
    def test_identity(self, l, ratio, s):
        a = conjugate_exponent(StrongContractionCertificate(l * ratio, l, 0.5, s))
        assert a > 1
        assert (1 / ratio) ** s + a**-s == pytest.approx(1.0, abs=1e-12)

    def test_bad_constants(self):
        for c, l, k in ((1.0, 1.0, 0.5), (1.0, 2.0, 0.5), (2.0, 1.0, 1.0), (2.0, 1.0, 0.0)):
            with pytest.raises(PreconditionError):
                StrongContractionCertificate(c, l, k)


class TestCorollary:
    def test_half(self):
        cert = corollary_reduction(0.5, 2.0, 1.5, 1.0)
        assert cert.l == pytest.approx(1.75)
        assert cert.k == pytest.approx(0.9258200997725514, rel=1e-12)

    def test_plain(self):
        cert = corollary_reduction(1.0, 2.0, 0.5, 1.0)
        assert cert.l == pytest.approx(1.5)
        assert cert.k == pytest.approx(1 / 3)

    def test_boundary_rejected(self):
        with pytest.raises(PreconditionError):
            corollary_reduction(1.0, 1.5, 1.5, 1.0)

    @given(st.floats(0.05, 1.0), st.floats(0.1, 3.0), st.floats(0.01, 5.0), st.floats(1.01, 4.0))
    def test_output_is_valid(self, s, l, k, margin):
        c = max(l, k * l) * margin
        cert = corollary_reduction(s, c, k, l)
        assert cert.c > cert.l
        assert 0 < cert.k < 1


def test_residual_examples(rho2):
    assert residual(rho2, 1.0, np.ones(2), np.ones(2)) == 0.0
    assert residual(rho2, 2.0, np.zeros(2), np.array([1.0, 0.0])) == 1.0
    x = np.array([2.0, 0.0])
    assert residual(rho2, 1.2, x, x + np.array([1e-9, 0.0])) == pytest.approx(3.6e-19, abs=1e-25)


class TestSolveStrong:
    def test_worked_example(self, rho2, half_shift):
        cert = StrongContractionCertificate(1.2, 1.0, 0.36)
        res = solve_strong(half_shift, rho2, cert, np.zeros(2), tol=1e-18)
        assert res.converged
        assert res.residual <= 1e-18
        assert rho2(1.2 * (res.point - np.array([2.0, 0.0]))) <= 1e-18
        assert res.info["alpha"] == pytest.approx(6.0)
        assert res.info["r"] == pytest.approx(36.0)
        tr = res.trace
        assert tr.compliant
        m3 = int(np.flatnonzero(tr.index == 3)[0])
        assert tr.distance_bound[m3] == pytest.approx(2.6244, rel=1e-12)
        assert tr.distance[m3] <= 2.6244

    def test_constant_map_one_step(self, rho2):
        b = np.array([3.0, -1.0])
        res = solve_strong(linear(np.zeros((2, 2)), b), rho2, StrongContractionCertificate(2.0, 1.0, 1e-12), b, 1e-12)
        assert res.converged and res.residual == 0.0
        assert res.iterations <= 1

    def test_overflow_start(self):
        rho = ModularFunctional([1.0], [OrliczGenerator.exponential()])
        T = linear([[0.1]], [1e4])
        with pytest.raises(SolverError, match="no admissible starting point"):
            solve_strong(T, rho, StrongContractionCertificate(2.0, 1.0, 0.5), np.zeros(1), 1e-8)

    def test_budget_exhausted(self, rho2, half_shift):
        res = solve_strong(half_shift, rho2, StrongContractionCertificate(1.2, 1.0, 0.36), np.zeros(2), 1e-30,
                           max_iter=5)
        assert not res.converged
        assert len(res.trace) == 5

    def test_mode_ii_needs_delta2(self, rho2, half_shift):
        cert = StrongContractionCertificate(0.8, 0.5, 0.64)
        with pytest.raises(PreconditionError):
            solve_strong(half_shift, rho2, cert, np.zeros(2), 1e-10, mode="theorem_1_2_ii")
        d2 = estimate_delta2(rho2, 1.0, 200)
        res = solve_strong(half_shift, rho2, cert, np.zeros(2), 1e-10, mode="theorem_1_2_ii", delta2=d2)
        assert res.converged and res.mode == "theorem_1_2_ii"

    def test_mode_i_needs_c_at_least_one(self, rho2, half_shift):
        with pytest.raises(PreconditionError):
            solve_strong(half_shift, rho2, StrongContractionCertificate(0.8, 0.5, 0.64), np.zeros(2), 1e-10,
                         mode="theorem_1_2_i")

    def test_geometric_chain(self, rho2, half_shift):
        # rho(c(x_{m+1}-x_m)) <= k rho(l(x_m - x_{m-1})) along the orbit
        c, l, k = 1.2, 1.0, 0.36
        x = [np.array([5.0, -3.0])]
        for _ in range(20):
            x.append(half_shift(x[-1]))
        for m in range(1, 20):
            lhs = rho2(c * (x[m + 1] - x[m]))
            assert lhs <= k * rho2(l * (x[m] - x[m - 1])) * (1 + 1e-9)
            assert lhs <= k * rho2(c * (x[m] - x[m - 1])) * (1 + 1e-9)

    @given(st.lists(st.floats(-100, 100), min_size=2, max_size=2), st.lists(st.floats(-100, 100), min_size=2,
                                                                            max_size=2))
    def test_restart_independence(self, a, b):
        rho = power_modular(2, 2.0)
        T = linear(0.5 * np.eye(2), [1, 0])
        cert = StrongContractionCertificate(1.2, 1.0, 0.36)
        tol = 1e-12
        z1 = solve_strong(T, rho, cert, np.array(a), tol, track_distance=False).point
        z2 = solve_strong(T, rho, cert, np.array(b), tol, track_distance=False).point
        assert rho(1.2 * (z1 - z2)) <= 2 * tol


class TestStrictDelta2:
    def test_worked_instance(self, rho2, half_shift):
        d2 = Delta2Certificate(1.0, 4.0, 0.0, 0.0, True)
        res = solve_strict_delta2(half_shift, rho2, StrictContractionCertificate(1.0, 0.25), d2, np.zeros(2), 1e-12)
        assert res.info["p0"] == 2
        assert res.info["threshold"] == pytest.approx(0.2)
        assert res.info["r"] <= 1.0
        assert res.converged and res.trace.compliant and res.info["uniqueness_ok"]
        assert np.allclose(res.point, [2.0, 0.0], atol=1e-6)

    def test_select_power(self):
        assert select_power(0.25, 1.0, 4.0, 0.0, 1.0) == 2
        assert select_power(0.1, 1.0, 4.0, 0.0, 1.0) == 1

    def test_bound_two_envelope(self):
        # with L=4, k0=0.0625, M=0, r=1 the envelope is (1 - 0.25^n)/0.75
        n = np.arange(1, 10)
        env = (1 - (4 * 0.0625) ** n) / (1 - 4 * 0.0625) * 1.0
        assert env == pytest.approx((1 - 0.25**n) / 0.75)

    def test_invalid_certificate(self, rho2, half_shift):
        d2 = Delta2Certificate(1.0, 4.0, 0.0, 1.0, False)
        with pytest.raises(PreconditionError, match="Delta_2 certificate required"):
            solve_strict_delta2(half_shift, rho2, StrictContractionCertificate(1.0, 0.25), d2, np.zeros(2), 1e-12)
        with pytest.raises(PreconditionError):
            solve_strict_delta2(half_shift, rho2, StrictContractionCertificate(1.0, 0.25), None, np.zeros(2), 1e-12)

    def test_burn_in_from_far_start(self, rho2, half_shift):
        d2 = Delta2Certificate(1.0, 4.0, 0.0, 0.0, True)
        res = solve_strict_delta2(half_shift, rho2, StrictContractionCertificate(1.0, 0.25), d2,
                                  np.array([100.0, 50.0]), 1e-12)
        assert res.info["burn_in"] > 0
        assert res.info["r"] <= 1.0
        assert res.converged and res.trace.compliant
