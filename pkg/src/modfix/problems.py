"""Concrete mappings and brute-force oracles.

Affine maps ``x -> A x + b`` (with analytic contraction constants under
weighted power modulars), planar rotations and a discretised Volterra
operator ``u -> g + Q (K f(u))`` on a uniform grid of ``[0, A]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, OracleError, PreconditionError
from .mapping import Domain, Mapping
from .modular import ModularFunctional, OrliczGenerator, power_modular

SINGULAR_COND = 1e12


@dataclass(frozen=True, eq=False)
class AffineMapSpec:
    """``x -> A x + b`` on a box (or all of R^n when bounds are omitted)."""

    A: np.ndarray
    b: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).ravel()
        n = b.size
        if A.shape != (n, n):
            raise DimensionMismatchError(n, A.shape)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        for name in ("lower", "upper"):
            v = getattr(self, name)
            if v is not None:
                v = np.broadcast_to(np.asarray(v, dtype=float), (n,)).copy()
                object.__setattr__(self, name, v)
        if (self.lower is None) != (self.upper is None):
            raise PreconditionError("box needs both lower and upper bounds")

    @property
    def dimension(self):
        return self.b.size

    @property
    def spectral_radius(self):
        return float(np.max(np.abs(np.linalg.eigvals(self.A)))) if self.dimension else 0.0

    def to_dict(self):
        d = {"type": "affine", "A": self.A.tolist(), "b": self.b.tolist()}
        if self.lower is not None:
            d["lower"] = self.lower.tolist()
            d["upper"] = self.upper.tolist()
        return d


def make_affine_map(spec, name="affine"):
    """Mapping for ``spec``; ``meta['spectral_radius']`` is recorded for diagnostics."""
    A, b = spec.A, spec.b
    if spec.lower is None:
        dom = Domain.whole_space(spec.dimension)
    else:
        dom = Domain.box(spec.lower, spec.upper)
    return Mapping(lambda x: A @ x + b, dom, name, affine=(A, b),
                   meta={"spectral_radius": spec.spectral_radius, "spec": spec})


def _induced_norm(M, p):
    if p == 1:
        return float(np.max(np.abs(M).sum(axis=0)))
    if p == 2:
        return float(np.linalg.norm(M, 2))
    # Riesz-Thorin interpolation between the 1- and inf-norms
    n1 = float(np.max(np.abs(M).sum(axis=0)))
    ninf = float(np.max(np.abs(M).sum(axis=1)))
    return n1 ** (1.0 / p) * ninf ** (1.0 - 1.0 / p)


def affine_contraction_constant(A, c, l, p, weights=None):
    """Analytic ``k`` with ``rho(c A x) <= k rho(l x)`` for ``rho(x) = sum w_i |x_i|^p``.

    ``k = (c/l)^p ||D A D^-1||_p^p`` with ``D = diag(w^(1/p))``.  Exact
    operator norm for ``p`` in {1, 2}, an interpolation upper bound for
    other ``p >= 1``.
    """
    if p < 1:
        raise PreconditionError("analytic constant needs p >= 1")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    d = w ** (1.0 / p)
    M = (d[:, None] * A) / d[None, :]
    return (c / l) ** p * _induced_norm(M, p) ** p


def rotation_matrix(theta, n=2):
    """Block-diagonal rotation by ``theta`` on ``R^n`` (``n`` even)."""
    if n < 2 or n % 2:
        raise PreconditionError("rotation needs an even dimension")
    c, s = math.cos(theta), math.sin(theta)
    R = np.zeros((n, n))
    for i in range(0, n, 2):
        R[i:i + 2, i:i + 2] = [[c, -s], [s, c]]
    return R


def make_rotation_map(theta, b):
    """``x -> R_theta x + b``, an isometry of the p=2 power modular."""
    b = np.asarray(b, dtype=float).ravel()
    R = rotation_matrix(theta, b.size)
    return Mapping(lambda x: R @ x + b, Domain.whole_space(b.size), f"rotation[{theta:.6g}]",
                   affine=(R, b), meta={"theta": float(theta)})


def segment_closed_form(A, b, z, k):
    """Solution of ``x = (1 - k) z + k (A x + b)``: ``(I - k A)^-1 ((1 - k) z + k b)``."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    return np.linalg.solve(np.eye(n) - k * A, (1.0 - k) * np.asarray(z, dtype=float) + k * np.asarray(b, dtype=float))


def random_affine_contraction(rng, n_max=8, p_choices=(1.0, 2.0), ratio_range=(1.05, 3.0), k_range=(0.1, 0.9)):
    """Random affine strong contraction with its analytic constants.

    Returns ``(spec, rho, c, l, k)`` where ``rho`` is a weighted power
    modular and ``k = affine_contraction_constant(A, c, l, p, w)`` equals a
    target drawn from ``k_range``.
    """
    n = int(rng.integers(1, n_max + 1))
    p = float(rng.choice(p_choices))
    w = rng.uniform(0.5, 2.0, size=n)
    l = float(rng.uniform(0.5, 2.0))
    c = l * float(rng.uniform(*ratio_range))
    target = float(rng.uniform(*k_range))
    A0 = rng.standard_normal((n, n))
    base = affine_contraction_constant(A0, c, l, p, w)
    A = A0 * (target / base) ** (1.0 / p)
    b = rng.uniform(-5.0, 5.0, size=n)
    spec = AffineMapSpec(A, b)
    rho = power_modular(n, p, weights=w)
    return spec, rho, c, l, affine_contraction_constant(A, c, l, p, w)


# Volterra operator registries: each entry builds a vectorised function from params.

KERNELS = {
    "zero": (lambda **_: lambda t, s: np.zeros(np.broadcast(t, s).shape), lambda **_: 0.0),
    "constant": (
        lambda kappa=1.0, **_: lambda t, s: np.full(np.broadcast(t, s).shape, float(kappa)),
        lambda kappa=1.0, **_: abs(float(kappa)),
    ),
    "exp_decay": (
        lambda kappa=1.0, rate=1.0, **_: lambda t, s: kappa * np.exp(-rate * (t - s)),
        lambda kappa=1.0, rate=1.0, **_: abs(float(kappa)),
    ),
}

NONLINEARITIES = {
    "identity": (lambda **_: lambda u: u, lambda **_: 1.0),
    "scaled": (lambda a=1.0, **_: lambda u: a * u, lambda a=1.0, **_: abs(float(a))),
    "sin": (lambda a=1.0, **_: lambda u: a * np.sin(u), lambda a=1.0, **_: abs(float(a))),
    "tanh": (lambda a=1.0, **_: lambda u: a * np.tanh(u), lambda a=1.0, **_: abs(float(a))),
}

FORCING = {
    "zero": lambda **_: lambda t: np.zeros_like(t),
    "constant": lambda value=1.0, **_: lambda t: np.full_like(t, float(value)),
    "linear": lambda a=0.0, b=1.0, **_: lambda t: a + b * t,
    "cosine": lambda a=1.0, omega=1.0, **_: lambda t: a * np.cos(omega * t),
}

REFERENCES = {
    "exp": lambda t: np.exp(t),
}


@dataclass(frozen=True)
class VolterraSpec:
    """``u(t) = g(t) + int_0^t K(t, s) f(u(s)) ds`` on ``m`` nodes of ``[0, A]``.

    Kernel, nonlinearity and forcing are names from :data:`KERNELS`,
    :data:`NONLINEARITIES` and :data:`FORCING`.  ``lipschitz`` defaults to
    the registry value and is checked against ``f`` on a sample grid.
    """

    horizon: float = 1.0
    grid_size: int = 128
    kernel: str = "constant"
    nonlinearity: str = "identity"
    forcing: str = "constant"
    kernel_params: dict = field(default_factory=dict)
    nonlinearity_params: dict = field(default_factory=dict)
    forcing_params: dict = field(default_factory=dict)
    lipschitz: float | None = None
    reference: str | None = None

    def __post_init__(self):
        if not self.horizon > 0:
            raise PreconditionError("horizon must be positive")
        if int(self.grid_size) < 2:
            raise PreconditionError("grid size must be >= 2")
        for name, reg in ((self.kernel, KERNELS), (self.nonlinearity, NONLINEARITIES), (self.forcing, FORCING)):
            if name not in reg:
                raise PreconditionError(f"unknown registry entry {name!r}")
        if self.reference is not None and self.reference not in REFERENCES:
            raise PreconditionError(f"unknown reference {self.reference!r}")
        declared = self.lipschitz
        if declared is None:
            declared = NONLINEARITIES[self.nonlinearity][1](**self.nonlinearity_params)
            object.__setattr__(self, "lipschitz", float(declared))
        f = self.f
        u = np.linspace(-10.0, 10.0, 2001)
        v = u + np.linspace(1e-3, 2.0, 2001)
        ratio = np.abs(f(u) - f(v)) / np.abs(u - v)
        if np.any(ratio > declared * (1.0 + 1e-9) + 1e-12):
            raise PreconditionError(f"declared Lipschitz constant {declared} is violated (ratio {ratio.max():.6g})")

    @property
    def f(self):
        return NONLINEARITIES[self.nonlinearity][0](**self.nonlinearity_params)

    @property
    def step(self):
        return self.horizon / (self.grid_size - 1)

    @property
    def grid(self):
        return np.linspace(0.0, self.horizon, int(self.grid_size))

    @property
    def kernel_sup(self):
        return float(KERNELS[self.kernel][1](**self.kernel_params))

    def quadrature_matrix(self):
        """Left-rectangle weights: ``(Q v)_i = h sum_{j < i} K(t_i, t_j) v_j``."""
        t = self.grid
        K = KERNELS[self.kernel][0](**self.kernel_params)
        with np.errstate(over="ignore", invalid="ignore"):
            vals = np.asarray(K(t[:, None], t[None, :]), dtype=float)
        Q = np.tril(vals, -1) * self.step
        bad = ~np.isfinite(Q)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise PreconditionError(f"kernel evaluation failed at node (t={t[i]:.6g}, s={t[j]:.6g})")
        return Q

    def forcing_values(self):
        return np.asarray(FORCING[self.forcing](**self.forcing_params)(self.grid), dtype=float)

    def reference_values(self):
        if self.reference is None:
            raise PreconditionError("no reference solution registered for this problem")
        return REFERENCES[self.reference](self.grid)

    def replace(self, **changes):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(changes)
        return VolterraSpec(**d)

    def to_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["type"] = "volterra"
        return d


def bielecki_rate(spec):
    """Exponential weight rate: 0 when ``Lip(f) sup|K| A < 1``, else ``2 Lip(f) sup|K|``."""
    q = spec.lipschitz * spec.kernel_sup
    return 0.0 if q * spec.horizon < 1.0 else 2.0 * q


def volterra_modular(spec, gamma=None):
    """p=1 modular ``sum_i h exp(-gamma t_i) |u_i|`` (quadrature weights, optionally Bielecki-damped)."""
    gamma = bielecki_rate(spec) if gamma is None else float(gamma)
    w = spec.step * np.exp(-gamma * spec.grid)
    return ModularFunctional(w, [OrliczGenerator.power(1.0)] * spec.grid_size)


def volterra_constant(spec, weights, Q=None):
    """``k = Lip(f) max_j sum_i w_i |Q_ij| / w_j``, so ``rho(Tu - Tv) <= k rho(u - v)``."""
    Q = spec.quadrature_matrix() if Q is None else Q
    w = np.asarray(weights, dtype=float)
    cols = (w[:, None] * np.abs(Q)).sum(axis=0) / w
    return spec.lipschitz * float(cols.max())


def make_volterra_operator(spec, gamma=None):
    """Mapping ``u -> g + Q f(u)`` on R^m.

    ``meta`` reports the modular weights, the certified strict constant
    ``k`` (``c = l = 1``) and, when ``k < 1``, a strong-contraction triple
    ``(c, l, k')`` valid for the homogeneous p=1 modular.
    """
    Q = spec.quadrature_matrix()
    g = spec.forcing_values()
    f = spec.f
    rho = volterra_modular(spec, gamma)
    k = volterra_constant(spec, rho.weights, Q)
    meta = {
        "spec": spec,
        "grid": spec.grid,
        "gamma": bielecki_rate(spec) if gamma is None else float(gamma),
        "modular": rho,
        "k": k,
        "sup_norm_ratio": spec.lipschitz * spec.kernel_sup * spec.horizon,
        "c": 1.0,
        "l": 1.0,
    }
    if k < 1.0:
        ratio = 0.5 * (1.0 + 1.0 / k) if k > 0 else 2.0
        meta["strong"] = {"c": ratio, "l": 1.0, "k": max(k * ratio, 1e-12)}
    affine = None
    if spec.nonlinearity == "identity":
        affine = (Q, g)
    elif spec.nonlinearity == "scaled":
        affine = (Q * float(spec.nonlinearity_params.get("a", 1.0)), g)
    return Mapping(lambda u: g + Q @ f(u), Domain.whole_space(spec.grid_size), "volterra", affine=affine, meta=meta)


@dataclass(frozen=True, eq=False)
class OracleResult:
    point: np.ndarray
    displacement: float
    method: str
    iterations: int


def brute_force_fixed_point(T, method="linear_solve", budget=10_000):
    """Reference fixed point computed without any of the certified solvers.

    ``linear_solve`` solves ``(I - A) x = b`` for affine mappings.
    ``dense_picard`` iterates ``budget`` times from 0 and reports the last
    sup-norm displacement.
    """
    if method == "linear_solve":
        if T.affine is None:
            raise PreconditionError("linear_solve needs an affine mapping")
        A, b = T.affine
        M = np.eye(len(b)) - A
        if np.linalg.cond(M) > SINGULAR_COND:
            raise OracleError("no unique fixed point: I - A is singular")
        x = np.linalg.solve(M, b)
        return OracleResult(x, float(np.max(np.abs(T(x) - x))), method, 0)
    if method == "dense_picard":
        if budget < 1:
            raise PreconditionError("budget must be >= 1")
        x = np.zeros(T.dimension)
        disp = math.inf
        for _ in range(int(budget)):
            with np.errstate(over="ignore", invalid="ignore"):
                y = T(x)
            if not np.all(np.isfinite(y)):
                raise OracleError("no unique fixed point: Picard iteration diverged")
            disp = float(np.max(np.abs(y - x)))
            x = y
            if disp == 0.0:
                break
        return OracleResult(x, disp, method, _ + 1)
    raise PreconditionError(f"unknown oracle method {method!r}")


def problem_from_dict(d):
    """Build a mapping from ``{"type": "affine" | "rotation" | "translation" | "volterra", ...}``."""
    kind = d.get("type")
    if kind == "affine":
        return make_affine_map(AffineMapSpec(d["A"], d["b"], d.get("lower"), d.get("upper")))
    if kind == "rotation":
        return make_rotation_map(float(d["theta"]), d["b"])
    if kind == "translation":
        b = np.asarray(d["b"], dtype=float)
        return make_affine_map(AffineMapSpec(np.eye(b.size), b), name="translation")
    if kind == "volterra":
        fields = {k: v for k, v in d.items() if k != "type"}
        return make_volterra_operator(VolterraSpec(**fields))
    raise PreconditionError(f"unknown problem type {kind!r}")
