import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from modfix.contraction import StrictContractionCertificate, certify_strict, certify_strong, solve_strict_delta2
from modfix.errors import DimensionMismatchError, OracleError, PreconditionError
from modfix.mapping import check_self_map
from modfix.modular import estimate_delta2, power_modular
from modfix.problems import (
    AffineMapSpec,
    VolterraSpec,
    affine_contraction_constant,
    brute_force_fixed_point,
    make_affine_map,
    make_rotation_map,
    make_volterra_operator,
    problem_from_dict,
    random_affine_contraction,
)


class TestAffine:
    def test_half_shift(self):
        T = make_affine_map(AffineMapSpec(0.5 * np.eye(2), [1.0, 0.0]))
        assert brute_force_fixed_point(T).point == pytest.approx([2.0, 0.0])
        assert T.meta["spectral_radius"] == pytest.approx(0.5)

    def test_constant(self):
        b = np.array([3.0, -1.0, 2.0])
        T = make_affine_map(AffineMapSpec(np.zeros((3, 3)), b))
        assert brute_force_fixed_point(T).point == pytest.approx(b)

    def test_translation_has_no_fixed_point(self):
        T = make_affine_map(AffineMapSpec(np.eye(2), [1.0, 0.0]))
        with pytest.raises(OracleError, match="no unique fixed point"):
            brute_force_fixed_point(T)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            AffineMapSpec(np.eye(3), [1.0, 0.0])

    def test_box_self_map(self):
        T = make_affine_map(AffineMapSpec(0.5 * np.eye(2), [0.25, 0.25], [-1, -1], [1, 1]))
        assert check_self_map(T, 1000, 0)[0]

    def test_whole_space_self_map(self):
        assert check_self_map(make_rotation_map(0.3, [1.0, 2.0]), 1000, 0)[0]
        assert check_self_map(make_volterra_operator(VolterraSpec(grid_size=8)), 1000, 0)[0]

    @pytest.mark.parametrize("p", [1.0, 2.0])
    def test_certified_matches_analytic_for_diagonal(self, p):
        A = np.diag([0.3, -0.5, 0.2])
        rho = power_modular(3, p)
        T = make_affine_map(AffineMapSpec(A, np.ones(3)))
        k = affine_contraction_constant(A, 1.5, 1.0, p)
        assert k == pytest.approx((1.5 * 0.5) ** p)
        cert = certify_strong(T, rho, 1.5, 1.0, 2000, 0)
        assert cert.k_hat <= k * (1 + 1e-12)
        assert cert.k_hat == pytest.approx(k, rel=0.01)

    @given(st.integers(0, 10_000))
    def test_sampled_ratio_never_exceeds_analytic(self, seed):
        rng = np.random.default_rng(seed)
        spec, rho, c, l, k = random_affine_contraction(rng)
        cert = certify_strong(make_affine_map(spec), rho, c, l, 200, seed)
        assert cert.k_hat <= k * (1 + 1e-9)


class TestRotation:
    def test_quarter_turn(self):
        T = make_rotation_map(math.pi / 2, [1.0, 0.0])
        assert brute_force_fixed_point(T).point == pytest.approx([0.5, 0.5])

    def test_identity(self):
        T = make_rotation_map(0.0, [0.0, 0.0])
        x = np.array([1.5, -2.0])
        assert T(x) == pytest.approx(x)

    def test_half_turn(self):
        assert brute_force_fixed_point(make_rotation_map(math.pi, [2.0, 0.0])).point == pytest.approx([1.0, 0.0])

    def test_odd_dimension(self):
        with pytest.raises(PreconditionError):
            make_rotation_map(0.1, [1.0, 2.0, 3.0])

    @given(st.floats(0, 2 * math.pi), st.lists(st.floats(-10, 10), min_size=4, max_size=4))
    def test_isometry(self, theta, x):
        rho = power_modular(4, 2.0)
        T = make_rotation_map(theta, np.zeros(4))
        x = np.array(x)
        assert rho(T(x)) == pytest.approx(rho(x), rel=1e-12, abs=1e-12)


class TestVolterra:
    def test_zero_kernel(self):
        spec = VolterraSpec(grid_size=16, kernel="zero", forcing="linear", forcing_params={"a": 1.0, "b": 2.0})
        T = make_volterra_operator(spec)
        g = spec.forcing_values()
        assert T(np.random.default_rng(0).normal(size=16)) == pytest.approx(g)

    def test_small_kappa_zero_solution(self):
        spec = VolterraSpec(grid_size=32, kernel_params={"kappa": 0.5}, forcing="zero")
        T = make_volterra_operator(spec)
        assert T.meta["gamma"] == 0.0
        assert np.all(brute_force_fixed_point(T, "dense_picard", 100).point == 0.0)

    def test_exp_instance_against_picard(self):
        spec = VolterraSpec(reference="exp")
        T = make_volterra_operator(spec)
        rho = T.meta["modular"]
        oracle = brute_force_fixed_point(T, "dense_picard", 10_000)
        assert oracle.displacement < 1e-12
        # left-rectangle closed form u_i = (1 + h)^i
        assert oracle.point == pytest.approx((1 + spec.step) ** np.arange(128), rel=1e-12)
        d2 = estimate_delta2(rho, 1.0, 500)
        res = solve_strict_delta2(T, rho, StrictContractionCertificate(1.0, T.meta["k"]), d2, np.zeros(128), 1e-12)
        assert res.converged and res.trace.compliant
        assert rho(res.point - oracle.point) <= 1e-8

    def test_strict_certificate_for_small_product(self):
        spec = VolterraSpec(grid_size=40, nonlinearity="sin", nonlinearity_params={"a": 0.8})
        T = make_volterra_operator(spec)
        assert spec.lipschitz * spec.kernel_sup * spec.horizon < 1
        cert = certify_strict(T, T.meta["modular"], 1.0, 300, 0)
        assert cert.k_hat <= T.meta["k"] < 1

    def test_declared_lipschitz_checked(self):
        with pytest.raises(PreconditionError):
            VolterraSpec(nonlinearity="sin", lipschitz=0.5)

    def test_grid_size(self):
        with pytest.raises(PreconditionError):
            VolterraSpec(grid_size=1)

    def test_unknown_registry_entry(self):
        with pytest.raises(PreconditionError):
            VolterraSpec(kernel="arbitrary")

    def test_kernel_failure_reported(self):
        spec = VolterraSpec(grid_size=8, kernel="exp_decay", kernel_params={"rate": -1e4})
        with pytest.raises(PreconditionError, match="kernel evaluation failed"):
            make_volterra_operator(spec)

    def test_grid_refinement(self):
        dists = []
        for m in (16, 64, 256):
            spec = VolterraSpec(grid_size=m, reference="exp")
            T = make_volterra_operator(spec)
            u = brute_force_fixed_point(T, "dense_picard", 10_000).point
            dists.append(T.meta["modular"](u - spec.reference_values()))
        assert dists[0] > dists[1] > dists[2]


def test_problem_from_dict():
    assert problem_from_dict({"type": "translation", "b": [1, 0]}).affine[0] == pytest.approx(np.eye(2))
    with pytest.raises(PreconditionError):
        problem_from_dict({"type": "pde"})


def test_picard_divergence():
    T = make_affine_map(AffineMapSpec(3.0 * np.eye(1), [1.0]))
    with pytest.raises(OracleError):
        brute_force_fixed_point(T, "dense_picard", 10_000)
