"""Coordinate-wise Orlicz modulars on R^n.

A modular here is ``rho(x) = sum_i w_i * phi_i(|x_i|)`` where every
``phi_i`` is one of a small family of Orlicz generators.  Besides
evaluation, this module certifies, by sampling, the structural hypotheses
the fixed point solvers rely on: the modular axioms, the regular growth
condition (through the growth function ``W(t)``) and the local Delta_2
condition ``rho(x) <= delta  =>  rho(2x) <= L rho(x) + M``.

Elements of the space are plain 1-D numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionMismatchError, ModularOverflowError, PreconditionError

ATOL = 1e-12
RTOL = 1e-9

DELTA2_SAMPLE_CAP = 100_000
DELTA2_RATIO_CAP = 1e8

GENERATOR_KINDS = ("power", "exponential", "piecewise")

# below this the Taylor series of e^t - 1 - t is exact to double precision
_EXP_TAYLOR_CUTOFF = 1e-3


def leq(a, b, atol=ATOL, rtol=RTOL):
    """``a <= b`` up to the package-wide absolute/relative tolerance."""
    return a <= b + atol + rtol * abs(b)


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OrliczGenerator:
    """A scalar generator ``phi: [0, inf) -> [0, inf)``.

    Parameters
    ----------
    kind : {"power", "exponential", "piecewise"}
        ``power`` is ``t**p``; ``exponential`` is ``e^t - 1 - t``;
        ``piecewise`` interpolates ``knots`` linearly and extrapolates the
        last segment's slope past the final knot.
    p : float
        Exponent for the power kind.
    knots : tuple of (t, phi(t)) pairs
        Table for the piecewise kind; abscissae strictly increasing from 0.
    s : float
        Declared s-convexity parameter in (0, 1]; ``s = 1`` means convex.
    """

    kind: str
    p: float = 1.0
    knots: tuple = ()
    s: float = 1.0
    _kt: np.ndarray = field(init=False, repr=False, compare=False)
    _kv: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in GENERATOR_KINDS:
            raise PreconditionError(f"unknown generator kind {self.kind!r}; expected one of {GENERATOR_KINDS}")
        if not 0.0 < self.s <= 1.0:
            raise PreconditionError(f"s-convexity parameter must lie in (0, 1], got {self.s}")
        if self.kind == "power":
            if not self.p > 0:
                raise PreconditionError(f"power exponent must be positive, got {self.p}")
            if self.p < self.s:
                raise PreconditionError(f"power exponent p={self.p} below declared s={self.s}")
        kt = np.empty(0)
        kv = np.empty(0)
        if self.kind == "piecewise":
            knots = tuple((float(t), float(v)) for t, v in self.knots)
            if len(knots) < 2:
                raise PreconditionError("piecewise generator needs at least two knots")
            kt = np.array([k[0] for k in knots])
            kv = np.array([k[1] for k in knots])
            if kt[0] != 0.0 or np.any(np.diff(kt) <= 0):
                raise PreconditionError("piecewise knots must start at t=0 and be strictly increasing")
            object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "_kt", kt)
        object.__setattr__(self, "_kv", kv)

    @classmethod
    def power(cls, p, s=None):
        p = float(p)
        return cls("power", p=p, s=min(p, 1.0) if s is None else float(s))

    @classmethod
    def exponential(cls):
        return cls("exponential", p=1.0, s=1.0)

    @classmethod
    def piecewise(cls, knots, s=1.0):
        return cls("piecewise", p=1.0, knots=tuple(tuple(k) for k in knots), s=float(s))

    def __call__(self, t):
        """Evaluate on a nonnegative scalar or array (overflow gives inf)."""
        t = np.asarray(t, dtype=float)
        if self.kind == "power":
            return np.power(t, self.p)
        if self.kind == "exponential":
            with np.errstate(over="ignore", invalid="ignore"):
                big = np.expm1(t) - t
            small = t * t * (0.5 + t * (1 / 6 + t * (1 / 24 + t * (1 / 120 + t / 720))))
            return np.where(t < _EXP_TAYLOR_CUTOFF, small, big)
        kt, kv = self._kt, self._kv
        out = np.interp(t, kt, kv)
        slope = (kv[-1] - kv[-2]) / (kt[-1] - kt[-2])
        return np.where(t > kt[-1], kv[-1] + slope * (t - kt[-1]), out)

    @property
    def scale(self):
        """A characteristic magnitude used to place probe points."""
        if self.kind == "piecewise":
            return float(self._kt[-1])
        if self.kind == "exponential":
            return 5.0
        return 1.0

    @property
    def is_convex(self):
        if self.kind == "power":
            return self.p >= 1.0
        if self.kind == "exponential":
            return True
        slopes = np.diff(self._kv) / np.diff(self._kt)
        return bool(self._kv[0] == 0.0 and slopes[0] >= 0 and np.all(np.diff(slopes) >= -ATOL))

    def check_s_convexity(self, grid=None):
        """Check ``phi(a t) <= a^s phi(t)`` for ``a`` in [0, 1] on a grid."""
        t = np.linspace(0.0, 4.0 * self.scale, 201) if grid is None else np.asarray(grid, dtype=float)
        a = np.linspace(0.0, 1.0, 51)[:, None]
        with np.errstate(over="ignore", invalid="ignore"):
            lhs = self(a * t[None, :])
            rhs = a**self.s * self(t)[None, :]
        ok = np.isfinite(rhs)
        return bool(np.all(lhs[ok] <= rhs[ok] + ATOL + RTOL * np.abs(rhs[ok])))

    def to_dict(self):
        params = {}
        if self.kind == "power":
            params["p"] = self.p
        elif self.kind == "piecewise":
            params["knots"] = [list(k) for k in self.knots]
        return {"kind": self.kind, "params": params, "s": self.s}

    @classmethod
    def from_dict(cls, d):
        kind = d["kind"]
        params = d.get("params", {})
        s = d.get("s")
        if kind == "power":
            return cls.power(params["p"], s=s)
        if kind == "exponential":
            return cls.exponential()
        if kind == "piecewise":
            return cls.piecewise(params["knots"], s=1.0 if s is None else s)
        raise PreconditionError(f"unknown generator kind {kind!r}")


# ---------------------------------------------------------------------------
# modular functional
# ---------------------------------------------------------------------------


class ModularFunctional:
    """``rho(x) = sum_i w_i phi_i(|x_i|)`` on R^n.

    Instances are immutable.  ``strict=False`` skips the positivity check
    on the weights, which is only useful for building deliberately broken
    modulars to exercise :func:`verify_modular_axioms`.

    Examples
    --------
    >>> rho = power_modular(2, 2.0)
    >>> rho([3.0, 4.0])
    25.0
    """

    def __init__(self, weights, generators, strict=True):
        w = np.array(weights, dtype=float).reshape(-1)
        if w.size == 0:
            raise PreconditionError("modular dimension must be positive")
        if isinstance(generators, OrliczGenerator):
            generators = (generators,) * w.size
        generators = tuple(generators)
        if len(generators) != w.size:
            raise PreconditionError(f"{w.size} weights but {len(generators)} generators")
        if strict and not np.all(w > 0):
            raise PreconditionError("modular weights must be positive")
        if not np.all(np.isfinite(w)):
            raise PreconditionError("modular weights must be finite")
        w.setflags(write=False)
        self._w = w
        self._gens = generators
        groups = {}
        for i, g in enumerate(generators):
            groups.setdefault(g, []).append(i)
        self._groups = tuple((g, np.array(idx), w[idx]) for g, idx in groups.items())
        self._single = generators[0] if len(self._groups) == 1 else None

    @property
    def dimension(self):
        return self._w.size

    @property
    def weights(self):
        return self._w

    @property
    def generators(self):
        return self._gens

    @property
    def s(self):
        """The weakest declared s-convexity over all coordinates."""
        return min(g.s for g in self._gens)

    @property
    def is_convex(self):
        return all(g.is_convex for g in self._gens)

    @property
    def is_power(self):
        return all(g.kind == "power" for g in self._gens)

    @property
    def scale(self):
        return max(g.scale for g in self._gens)

    def __repr__(self):
        kinds = sorted({g.kind for g in self._gens})
        return f"ModularFunctional(dimension={self.dimension}, kinds={kinds})"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.size != self._w.size:
            raise DimensionMismatchError(self._w.size, x.shape[-1] if x.ndim else 0)
        a = np.abs(x)
        if self._single is not None:
            val = float(self._w @ self._single(a))
        else:
            val = sum(float(w @ g(a[idx])) for g, idx, w in self._groups)
        if not math.isfinite(val):
            raise ModularOverflowError(f"modular overflow: rho(x) = {val}")
        return val

    def batch(self, X):
        """Evaluate row-wise on an (m, n) array; overflow yields inf."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self._w.size:
            raise DimensionMismatchError(self._w.size, X.shape[-1])
        A = np.abs(X)
        with np.errstate(over="ignore", invalid="ignore"):
            if self._single is not None:
                vals = self._single(A) @ self._w
            else:
                vals = sum(g(A[:, idx]) @ w for g, idx, w in self._groups)
        return np.where(np.isnan(vals), np.inf, vals)

    def axis_values(self, coords, magnitudes):
        """``w_i phi_i(a)`` for paired arrays of coordinates and magnitudes."""
        coords = np.asarray(coords, dtype=int)
        a = np.abs(np.asarray(magnitudes, dtype=float))
        out = np.empty(a.shape)
        with np.errstate(over="ignore", invalid="ignore"):
            for g, idx, _ in self._groups:
                mask = np.isin(coords, idx)
                out[mask] = self._w[coords[mask]] * g(a[mask])
        return out

    def to_dict(self):
        return {
            "dimension": self.dimension,
            "entries": [{"weight": float(w), "generator": g.to_dict()} for w, g in zip(self._w, self._gens)],
        }

    @classmethod
    def from_dict(cls, d):
        """Build from ``{dimension, entries: [{weight, generator}]}``.

        The shorthand ``{dimension, generator, weights?}`` (one generator
        for every coordinate, weights defaulting to 1) is also accepted.
        """
        n = int(d["dimension"])
        if "entries" in d:
            entries = d["entries"]
            if len(entries) != n:
                raise PreconditionError(f"dimension {n} but {len(entries)} entries")
            weights = [float(e.get("weight", 1.0)) for e in entries]
            gens = [OrliczGenerator.from_dict(e["generator"]) for e in entries]
            return cls(weights, gens)
        gen = OrliczGenerator.from_dict(d["generator"])
        weights = d.get("weights", [float(d.get("weight", 1.0))] * n)
        if len(weights) != n:
            raise PreconditionError(f"dimension {n} but {len(weights)} weights")
        return cls(weights, gen)


def power_modular(n, p, weights=None, s=None):
    """Uniform power modular ``sum_i w_i |x_i|^p``."""
    w = np.ones(n) if weights is None else weights
    return ModularFunctional(w, OrliczGenerator.power(p, s=s))


def evaluate(rho, x):
    """``rho(x)``; raises on dimension mismatch or overflow."""
    return rho(x)


# ---------------------------------------------------------------------------
# sampling helpers
# ---------------------------------------------------------------------------


def _random_points(rng, count, n, scale):
    """Gaussian directions with log-uniform magnitudes in [1e-3, 4*scale]."""
    U = rng.standard_normal((count, n))
    norms = np.linalg.norm(U, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    mags = 10.0 ** rng.uniform(-3.0, math.log10(4.0 * scale), size=(count, 1))
    return U / norms * mags * math.sqrt(n)


def _axis_magnitudes(gen):
    mags = np.geomspace(1e-3, 4.0 * gen.scale, 41)
    if gen.kind == "piecewise":
        kt = gen._kt[1:]
        mags = np.concatenate([mags, kt, kt * 1.05, kt * 1.5])
    return np.unique(mags)


# ---------------------------------------------------------------------------
# axioms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AxiomCheck:
    name: str
    passed: bool
    worst_violation: float
    witness: dict | None = None


@dataclass(frozen=True)
class AxiomReport:
    checks: tuple
    sample_count: int
    seed: int

    @property
    def ok(self):
        return all(c.passed for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        return {
            "ok": self.ok,
            "sample_count": self.sample_count,
            "seed": self.seed,
            "checks": [
                {"name": c.name, "passed": c.passed, "worst_violation": c.worst_violation, "witness": c.witness}
                for c in self.checks
            ],
        }


def _check(name, excess, witnesses):
    """Build an AxiomCheck from per-sample excess (positive = violation)."""
    excess = np.asarray(excess, dtype=float)
    finite = np.isfinite(excess)
    if not np.any(finite):
        return AxiomCheck(name, True, 0.0, None)
    j = int(np.argmax(np.where(finite, excess, -np.inf)))
    worst = float(excess[j])
    if worst > 0:
        return AxiomCheck(name, False, worst, witnesses(j))
    return AxiomCheck(name, True, worst, None)


def verify_modular_axioms(rho, sample_count=1000, seed=0):
    """Sample the modular axioms and scalar monotonicity.

    Checks ``rho(0) = 0`` with ``rho(x) > 0`` for ``x != 0``, symmetry,
    ``rho(a x + b y) <= rho(x) + rho(y)`` for ``a + b = 1`` and
    ``t1 <= t2 => rho(t1 x) <= rho(t2 x)``.  Failures are reported with a
    witness, never raised.
    """
    if sample_count < 1:
        raise PreconditionError("sample_count must be >= 1")
    rng = np.random.default_rng(seed)
    n = rho.dimension
    scale = rho.scale
    X = _random_points(rng, sample_count, n, scale)
    Y = _random_points(rng, sample_count, n, scale)
    a = rng.uniform(0.0, 1.0, size=(sample_count, 1))
    t1 = rng.uniform(0.0, 2.0, size=(sample_count, 1))
    t2 = t1 + rng.uniform(0.0, 2.0, size=(sample_count, 1))

    rx = rho.batch(X)
    ry = rho.batch(Y)
    tol = lambda v: ATOL + RTOL * np.abs(v)  # noqa: E731

    # zero / positivity, including axis probes
    zero_val = float(rho.batch(np.zeros((1, n)))[0])
    coords, mags = [], []
    for g, idx, _ in rho._groups:
        m = _axis_magnitudes(g)
        coords.append(np.repeat(idx, m.size))
        mags.append(np.tile(m, idx.size))
    coords = np.concatenate(coords)
    mags = np.concatenate(mags)
    axis_vals = rho.axis_values(coords, mags)
    pos_excess = np.concatenate([[abs(zero_val) - ATOL], -np.concatenate([rx, axis_vals])])

    def zero_witness(j):
        if j == 0:
            return {"x": [0.0] * n, "rho": zero_val}
        j -= 1
        if j < sample_count:
            return {"x": X[j].tolist(), "rho": float(rx[j])}
        j -= sample_count
        x = np.zeros(n)
        x[coords[j]] = mags[j]
        return {"x": x.tolist(), "rho": float(axis_vals[j])}

    checks = [_check("zero", pos_excess, zero_witness)]

    rneg = rho.batch(-X)
    checks.append(
        _check(
            "symmetry",
            np.abs(rx - rneg) - tol(rx),
            lambda j: {"x": X[j].tolist(), "rho(x)": float(rx[j]), "rho(-x)": float(rneg[j])},
        )
    )

    comb = a * X + (1 - a) * Y
    rc = rho.batch(comb)
    checks.append(
        _check(
            "subadditivity",
            rc - (rx + ry) - tol(rx + ry),
            lambda j: {"x": X[j].tolist(), "y": Y[j].tolist(), "alpha": float(a[j, 0])},
        )
    )

    r1 = rho.batch(t1 * X)
    r2 = rho.batch(t2 * X)
    mono_excess = r1 - r2 - tol(r2)
    # dense scan along each axis catches non-monotone tables the random probes miss
    scan_coords, scan_t, scan_excess = [], [], []
    for g, idx, _ in rho._groups:
        grid = np.linspace(0.0, 4.0 * g.scale, 4001)
        i0 = idx[0]
        vals = rho.axis_values(np.full(grid.size, i0), grid)
        drop = vals[:-1] - vals[1:] - tol(vals[1:])
        scan_coords.append(np.full(drop.size, i0))
        scan_t.append(np.stack([grid[:-1], grid[1:]], axis=1))
        scan_excess.append(drop)
    scan_coords = np.concatenate(scan_coords)
    scan_t = np.concatenate(scan_t)
    all_excess = np.concatenate([mono_excess, np.concatenate(scan_excess)])

    def mono_witness(j):
        if j < sample_count:
            return {"x": X[j].tolist(), "t1": float(t1[j, 0]), "t2": float(t2[j, 0])}
        j -= sample_count
        x = np.zeros(n)
        x[scan_coords[j]] = 1.0
        return {"x": x.tolist(), "t1": float(scan_t[j, 0]), "t2": float(scan_t[j, 1])}

    checks.append(_check("monotonicity", all_excess, mono_witness))
    return AxiomReport(tuple(checks), sample_count, seed)


# ---------------------------------------------------------------------------
# growth function W(t)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GrowthSample:
    t: float
    estimate: float
    witness: np.ndarray = field(repr=False, compare=False)


def _growth_probe(rho, sample_count, seed):
    rng = np.random.default_rng(seed)
    X = _random_points(rng, sample_count, rho.dimension, rho.scale)
    coords, mags = [], []
    for g, idx, _ in rho._groups:
        m = _axis_magnitudes(g)
        # weights cancel in the axis ratio, so one coordinate per generator suffices
        coords.append(np.full(m.size, idx[0]))
        mags.append(m)
    return X, np.concatenate(coords), np.concatenate(mags)


def _growth_at(rho, t, probe):
    X, coords, mags = probe
    rx = rho.batch(X)
    rtx = rho.batch(t * X)
    ok = (rx > 0) & np.isfinite(rx)
    ratios = np.full(rx.shape, -np.inf)
    ratios[ok] = rtx[ok] / rx[ok]
    ax = rho.axis_values(coords, mags)
    atx = rho.axis_values(coords, t * mags)
    aok = (ax > 0) & np.isfinite(ax)
    aratios = np.full(ax.shape, -np.inf)
    aratios[aok] = atx[aok] / ax[aok]
    j = int(np.argmax(ratios)) if ratios.size else -1
    ja = int(np.argmax(aratios))
    if j >= 0 and ratios[j] >= aratios[ja]:
        return float(ratios[j]), X[j].copy()
    x = np.zeros(rho.dimension)
    x[coords[ja]] = mags[ja]
    return float(aratios[ja]), x


def growth_function_estimate(rho, t, sample_count=1000, seed=0):
    """Lower estimate of ``W(t) = sup rho(t x) / rho(x)`` over ``0 < rho(x) < inf``.

    The supremum is taken over random probes plus axis-aligned probes;
    for coordinate-wise modulars the axis probes attain the supremum over
    the probed magnitude range.
    """
    t = float(t)
    if not 0.0 <= t < 1.0:
        raise PreconditionError(f"growth function argument must lie in [0, 1), got {t}")
    est, wit = _growth_at(rho, t, _growth_probe(rho, sample_count, seed))
    return GrowthSample(t, est, wit)


@dataclass(frozen=True)
class GrowthProfile:
    """Sampled growth function on a grid plus the regular growth verdict.

    ``at(t)`` re-estimates ``W`` off-grid using the same probe set, so
    values stay comparable with the grid samples.
    """

    samples: tuple
    sample_count: int
    seed: int
    regular_growth_ok: bool
    margin: float
    min_gap: float
    s_convex_bound: float | None
    rho: ModularFunctional = field(repr=False, compare=False)

    def at(self, t):
        for smp in self.samples:
            if smp.t == t:
                return smp.estimate
        return growth_function_estimate(self.rho, t, self.sample_count, self.seed).estimate

    def to_dict(self):
        return {
            "regular_growth_ok": self.regular_growth_ok,
            "margin": self.margin,
            "min_gap": self.min_gap,
            "s_convex_bound": self.s_convex_bound,
            "sample_count": self.sample_count,
            "seed": self.seed,
            "samples": [{"t": s.t, "W": s.estimate} for s in self.samples],
        }


def check_regular_growth(rho, t_grid, sample_count=1000, seed=0, margin=1e-12):
    """Estimate ``W`` on ``t_grid`` and decide ``W(t) < 1 - margin`` everywhere.

    When every generator is declared s-convex and passes the grid check,
    ``s_convex_bound`` carries ``s`` (the analytic guarantee is
    ``W(t) <= t^s``); otherwise it is None.
    """
    grid = [float(t) for t in t_grid]
    if not grid:
        raise PreconditionError("t_grid must be nonempty")
    for t in grid:
        if not 0.0 <= t < 1.0:
            raise PreconditionError(f"growth function argument must lie in [0, 1), got {t}")
    probe = _growth_probe(rho, sample_count, seed)
    samples = []
    for t in grid:
        est, wit = _growth_at(rho, t, probe)
        samples.append(GrowthSample(t, est, wit))
    gap = min(1.0 - s.estimate for s in samples)
    s_bound = None
    if all(g.check_s_convexity() for g in set(rho.generators)):
        s_bound = rho.s
    return GrowthProfile(tuple(samples), sample_count, seed, gap > margin, margin, gap, s_bound, rho)


# ---------------------------------------------------------------------------
# local Delta_2 condition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Delta2Certificate:
    """Constants ``(delta, L, M)`` with ``rho(x) <= delta => rho(2x) <= L rho(x) + M``."""

    delta: float
    L: float
    M: float
    empirical_margin: float
    valid: bool
    worst_ratio: float = float("nan")
    sample_count: int = 0
    seed: int = 0
    M_free: bool = False

    def to_dict(self):
        return {
            "delta": self.delta,
            "L": self.L,
            "M": self.M,
            "empirical_margin": self.empirical_margin,
            "valid": self.valid,
            "worst_ratio": self.worst_ratio,
            "sample_count": self.sample_count,
            "seed": self.seed,
            "M_free": self.M_free,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            float(d["delta"]),
            float(d["L"]),
            float(d["M"]),
            float(d.get("empirical_margin", 0.0)),
            bool(d.get("valid", True)),
            float(d.get("worst_ratio", float("nan"))),
            int(d.get("sample_count", 0)),
            int(d.get("seed", 0)),
            bool(d.get("M_free", False)),
        )


def _ray_bisect(values_at, targets, hi_cap=1e12, steps=90):
    """Largest ``s`` (to bisection precision) with ``values_at(s) <= target`` per row."""
    lo = np.zeros_like(targets)
    hi = np.ones_like(targets)
    for _ in range(200):
        short = values_at(hi) < targets
        if not np.any(short) or np.all(hi[short] >= hi_cap):
            break
        hi = np.where(short & (hi < hi_cap), hi * 2.0, hi)
    reachable = values_at(hi) >= targets
    hi = np.where(reachable, hi, hi_cap)
    lo = np.where(reachable, lo, hi_cap)
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        below = values_at(mid) <= targets
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return lo


def _delta2_samples(rho, delta, sample_count, seed):
    """Values ``(rho(x), rho(2x))`` for sampled ``x`` with ``rho(x) <= delta``."""
    rng = np.random.default_rng(seed)
    n = rho.dimension
    U = rng.standard_normal((sample_count, n))
    q = 10.0 ** rng.uniform(-6.0, 0.0, size=sample_count)
    q[: max(1, sample_count // 10)] = 1.0
    s = _ray_bisect(lambda sv: rho.batch(sv[:, None] * U), q * delta)
    X = s[:, None] * U
    r1 = rho.batch(X)
    r2 = rho.batch(2.0 * X)

    levels = np.geomspace(1e-6, 1.0, 25)
    coords = np.concatenate([np.repeat(idx, levels.size) for _, idx, _ in rho._groups])
    targets = np.tile(levels, coords.size // levels.size) * delta
    a = _ray_bisect(lambda av: rho.axis_values(coords, av), targets)
    a1 = rho.axis_values(coords, a)
    a2 = rho.axis_values(coords, 2.0 * a)
    return np.concatenate([r1, a1]), np.concatenate([r2, a2])


def estimate_delta2(rho, delta, sample_count=2000, seed=0, M=0.0, ratio_cap=DELTA2_RATIO_CAP):
    """Fit local Delta_2 constants on samples with ``rho(x) <= delta``.

    With ``M`` fixed (default 0) the smallest ``L`` consistent with the
    samples is returned.  If no finite ``L`` below ``ratio_cap`` exists,
    the fit is retried with ``L = 1`` and ``M`` free; if that also
    exceeds the cap the certificate comes back with ``valid=False``.
    """
    delta = float(delta)
    if not delta > 0:
        raise PreconditionError(f"delta must be positive, got {delta}")
    sample_count = int(min(max(sample_count, 1), DELTA2_SAMPLE_CAP))
    r1, r2 = _delta2_samples(rho, delta, sample_count, seed)
    keep = np.isfinite(r1) & np.isfinite(r2) & (r1 <= delta)
    r1, r2 = r1[keep], r2[keep]
    pos = r1 > 0
    if np.any(~pos & (r2 > 0)):
        need = np.inf
    elif np.any(pos):
        need = float(np.max((r2[pos] - M) / r1[pos]))
    else:
        need = 0.0
    worst_ratio = float(np.max(r2[pos] / r1[pos])) if np.any(pos) else 0.0
    M_free = False
    L = max(need, 0.0)
    M_used = float(M)
    if not (math.isfinite(L) and L <= ratio_cap):
        M_free = True
        L = 1.0
        M_used = float(max(np.max(r2 - r1), 0.0)) if r1.size else 0.0
    excess = r2 - (L * r1 + M_used) if r1.size else np.zeros(1)
    margin = float(np.max(excess))
    tol_ok = bool(np.all(excess <= ATOL + RTOL * np.abs(r2))) if r1.size else True
    valid = tol_ok and math.isfinite(M_used) and M_used <= ratio_cap
    return Delta2Certificate(delta, L, M_used, margin, valid, worst_ratio, sample_count, seed, M_free)


def replay_delta2(cert, rho, sample_count=2000, seed=1):
    """Re-check a certificate on a fresh sample set.

    Returns ``(worst_excess, ok)`` where ``ok`` means no fresh sample
    violates ``rho(2x) <= L rho(x) + M`` beyond tolerance.
    """
    r1, r2 = _delta2_samples(rho, cert.delta, int(min(sample_count, DELTA2_SAMPLE_CAP)), seed)
    keep = np.isfinite(r1) & np.isfinite(r2) & (r1 <= cert.delta)
    excess = r2[keep] - (cert.L * r1[keep] + cert.M)
    ok = bool(np.all(excess <= ATOL + RTOL * np.abs(r2[keep])))
    return float(np.max(excess)) if excess.size else 0.0, ok


def as_element(x, rho=None):
    """Coerce to a float vector, checking the dimension against ``rho``."""
    x = np.array(x, dtype=float).reshape(-1)
    if rho is not None and x.size != rho.dimension:
        raise DimensionMismatchError(rho.dimension, x.size)
    return x


def is_power_modular(rho: ModularFunctional, p: float | None = None) -> bool:
    if not rho.is_power:
        return False
    ps = {g.p for g in rho.generators}
    return len(ps) == 1 and (p is None or ps == {p})


def power_exponent(rho: ModularFunctional) -> float:
    if not is_power_modular(rho):
        raise PreconditionError("modular is not a uniform power modular")
    return rho.generators[0].p


__all__: Sequence[str] = (
    "OrliczGenerator",
    "ModularFunctional",
    "power_modular",
    "evaluate",
    "verify_modular_axioms",
    "AxiomReport",
    "AxiomCheck",
    "growth_function_estimate",
    "GrowthSample",
    "GrowthProfile",
    "check_regular_growth",
    "Delta2Certificate",
    "estimate_delta2",
    "replay_delta2",
    "as_element",
    "leq",
)
