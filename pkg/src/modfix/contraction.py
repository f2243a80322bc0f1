"""Fixed points of strong and strict rho-contractions.

Two iteration schemes live here:

* :func:`solve_strong` for maps with ``rho(c(Tx - Ty)) <= k rho(l(x - y))``
  and ``c > l``.  The orbit ``T^m x0`` obeys the a-priori estimate
  ``rho(c(z - T^m x0)) <= k^m / (1 - k) * r`` with
  ``r = rho(alpha l (T x0 - x0))`` and ``alpha`` the conjugate exponent of
  ``c / l``.  Iteration stops as soon as that bound drops below ``tol``.

* :func:`solve_strict_delta2` for ``c = l`` when the modular satisfies a
  local Delta_2 condition.  The orbit is first advanced until
  ``r = rho(2c(T x0 - x0))`` is small, then the iterate ``S = T^p0`` is
  used, where ``p0`` is the first power with
  ``k^p0 <= delta / (M + r + L delta)``.

The a-priori bound on ``rho(c(z - T^m x0))`` passes to the limit because
coordinate-wise modulars are continuous (so they have the Fatou
property); traces record it against a refined reference point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CertificationError, ModularOverflowError, PreconditionError, SolverError
from .modular import as_element

DEFAULT_MAX_ITER = 1_000_000
DEFAULT_SAFETY = 0.01
BOUND_RTOL = 1e-9
K_FLOOR = 1e-12
# residuals at this many ulps of the point count as zero
ROUNDOFF_ULPS = 64

# magnitudes of the axis-aligned probe differences
AXIS_LEVELS = np.geomspace(1e-2, 10.0, 7)

MODES = ("theorem_1_1", "theorem_1_2_i", "theorem_1_2_ii")


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StrongContractionCertificate:
    """Constants with ``rho(c(Tx - Ty)) <= k rho(l(x - y))`` on ``B``.

    ``s`` is the s-convexity parameter used to split convex combinations
    (``s = 1`` for plain modulars).  ``k_hat`` is the empirical ratio the
    certificate was inflated from, when it came from sampling.
    """

    c: float
    l: float
    k: float
    s: float = 1.0
    k_hat: float | None = None

    def __post_init__(self):
        if not (self.c > self.l > 0):
            raise PreconditionError(f"strong contraction needs c > l > 0, got c={self.c}, l={self.l}")
        if not 0.0 < self.k < 1.0:
            raise PreconditionError(f"contraction constant must lie in (0, 1), got k={self.k}")
        if not 0.0 < self.s <= 1.0:
            raise PreconditionError(f"s must lie in (0, 1], got {self.s}")

    @property
    def alpha(self):
        return conjugate_exponent(self)

    def to_dict(self):
        return {"type": "strong", "c": self.c, "l": self.l, "k": self.k, "s": self.s, "alpha": self.alpha, "k_hat": self.k_hat}


@dataclass(frozen=True)
class StrictContractionCertificate:
    """Constants with ``rho(c(Tx - Ty)) <= k rho(c(x - y))`` on ``B``."""

    c: float
    k: float
    k_hat: float | None = None

    def __post_init__(self):
        if not self.c > 0:
            raise PreconditionError(f"scale c must be positive, got {self.c}")
        if not 0.0 < self.k < 1.0:
            raise PreconditionError(f"contraction constant must lie in (0, 1), got k={self.k}")

    def to_dict(self):
        return {"type": "strict", "c": self.c, "k": self.k, "k_hat": self.k_hat}


def conjugate_exponent(cert):
    """``alpha`` with ``(l/c)^s + alpha^-s = 1``; for ``s = 1`` this is ``c / (c - l)``.

    >>> conjugate_exponent(StrongContractionCertificate(c=2.0, l=1.0, k=0.5))
    2.0
    """
    c, l, s = float(cert.c), float(cert.l), float(cert.s)
    if not c > l:
        raise PreconditionError(f"conjugate exponent needs c > l, got c={c}, l={l}")
    if s == 1.0:
        return c / (c - l)
    return (1.0 - (l / c) ** s) ** (-1.0 / s)


def corollary_reduction(s, c, k, l):
    """Turn ``rho(c(Tx-Ty)) <= k^s rho(l(x-y))`` with ``c > max(l, kl)`` into a strong certificate.

    Uses ``l0 = (c + max(l, kl)) / 2`` and ``k0 = (l k / l0)^s`` so that
    ``c > l0`` and ``k0 < 1``.
    """
    s, c, k, l = float(s), float(c), float(k), float(l)
    if not 0.0 < s <= 1.0:
        raise PreconditionError(f"s must lie in (0, 1], got {s}")
    if not (k > 0 and l > 0):
        raise PreconditionError("k and l must be positive")
    floor = max(l, k * l)
    if not c > floor:
        raise PreconditionError(f"corollary needs c > max(l, kl) = {floor}, got c={c}")
    l0 = 0.5 * (c + floor)
    k0 = (l * k / l0) ** s
    return StrongContractionCertificate(c, l0, k0, s)


def _pair_values(T, rho, c, l, X, Y):
    num = np.empty(len(X))
    den = np.empty(len(X))
    TX = np.array([T(x) for x in X])
    TY = np.array([T(y) for y in Y])
    num[:] = rho.batch(c * (TX - TY))
    den[:] = rho.batch(l * (X - Y))
    return num, den


def _axis_pairs(domain, X, rng, levels=AXIS_LEVELS):
    """Pairs ``(x, x + a e_j)`` over coordinates ``j`` and magnitudes ``a``, kept inside the domain."""
    n = domain.dimension
    base = X[rng.integers(0, len(X), size=n * levels.size)]
    steps = np.zeros_like(base)
    rows = np.arange(base.shape[0])
    steps[rows, np.repeat(np.arange(n), levels.size)] = np.tile(levels, n)
    Y = base + steps
    keep = np.array([y in domain for y in Y], dtype=bool) if not domain.is_whole_space else np.ones(len(Y), bool)
    return base[keep], Y[keep]


def contraction_ratio(T, rho, c, l, pair_count=1000, seed=0, pairs=None):
    """Largest sampled ``rho(c(Tx - Ty)) / rho(l(x - y))``.

    Random pairs are supplemented by axis probes ``(x, x + a e_j)``, which
    attain the supremum for coordinate-wise modulars and diagonal maps.
    Returns ``(k_hat, witness)``.  Pairs with ``rho(l(x - y)) = 0`` are
    skipped when the numerator vanishes too; otherwise no finite ratio
    exists and :class:`CertificationError` is raised.
    """
    if pairs is None:
        if pair_count < 1:
            raise PreconditionError("pair_count must be >= 1")
        rng = np.random.default_rng(seed)
        X = T.domain.sample(rng, pair_count)
        Y = T.domain.sample(rng, pair_count)
        AX, AY = _axis_pairs(T.domain, X, rng)
        X, Y = np.vstack([X, AX]), np.vstack([Y, AY])
    else:
        X, Y = (np.asarray(a, dtype=float) for a in pairs)
    num, den = _pair_values(T, rho, c, l, X, Y)
    bad = (den == 0) & (num > 0)
    if np.any(bad):
        j = int(np.argmax(bad))
        raise CertificationError(
            "rho(l(x-y)) = 0 but rho(c(Tx-Ty)) > 0: no finite contraction constant",
            witness={"x": X[j].tolist(), "y": Y[j].tolist(), "numerator": float(num[j])},
        )
    ratios = np.zeros(len(X))
    live = den > 0
    with np.errstate(invalid="ignore", over="ignore"):
        ratios[live] = num[live] / den[live]
    ratios[~np.isfinite(ratios)] = np.inf
    j = int(np.argmax(ratios))
    witness = {"x": X[j].tolist(), "y": Y[j].tolist(), "ratio": float(ratios[j])}
    return float(ratios[j]), witness


def _inflate(k_hat, safety):
    k = k_hat * (1.0 + safety)
    if k >= 1.0:
        k = 0.5 * (1.0 + k_hat)
    return max(k, K_FLOOR)


def certify_strong(T, rho, c, l, pair_count=1000, seed=0, safety=DEFAULT_SAFETY, s=1.0):
    """Estimate ``k`` in ``rho(c(Tx-Ty)) <= k rho(l(x-y))`` from random pairs.

    The certified constant is the empirical maximum inflated by
    ``safety`` (sampling underestimates the supremum).  A ratio of at
    least one raises :class:`CertificationError` carrying the pair.
    """
    c, l = float(c), float(l)
    if not (c > l > 0):
        raise PreconditionError(f"strong contraction needs c > l > 0, got c={c}, l={l}")
    k_hat, witness = contraction_ratio(T, rho, c, l, pair_count, seed)
    if not k_hat < 1.0:
        raise CertificationError(f"empirical ratio {k_hat:.6g} >= 1: not a strong rho-contraction", witness)
    return StrongContractionCertificate(c, l, _inflate(k_hat, safety), s, k_hat=k_hat)


def certify_strict(T, rho, c, pair_count=1000, seed=0, safety=DEFAULT_SAFETY):
    """Estimate ``k`` in ``rho(c(Tx-Ty)) <= k rho(c(x-y))``."""
    c = float(c)
    if not c > 0:
        raise PreconditionError(f"scale c must be positive, got {c}")
    k_hat, witness = contraction_ratio(T, rho, c, c, pair_count, seed)
    if not k_hat < 1.0:
        raise CertificationError(f"empirical ratio {k_hat:.6g} >= 1: not a strict rho-contraction", witness)
    return StrictContractionCertificate(c, _inflate(k_hat, safety), k_hat=k_hat)


# ---------------------------------------------------------------------------
# traces and results
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class IterationTrace:
    """Per-step residuals next to the theoretical bound at that step.

    ``residual``/``bound`` hold the scheme's monitored quantity (for the
    strong scheme the step ``rho(c(T^{m+1}x0 - T^m x0))`` against
    ``k^m r``).  ``distance``/``distance_bound``, when present, hold
    ``rho(c(z - x_m))`` against the a-priori estimate for a reference
    fixed point ``z``.
    """

    index: np.ndarray
    residual: np.ndarray
    bound: np.ndarray
    initial_r: float
    distance: np.ndarray | None = None
    distance_bound: np.ndarray | None = None
    scheme: str = "strong"

    def __len__(self):
        return len(self.index)

    def violations(self, rtol=BOUND_RTOL):
        """Row positions where a monitored quantity exceeds its bound."""
        bad = self.residual > self.bound * (1.0 + rtol)
        if self.distance is not None:
            bad = bad | (self.distance > self.distance_bound * (1.0 + rtol))
        return np.flatnonzero(bad)

    @property
    def compliant(self):
        return self.violations().size == 0

    @property
    def columns(self):
        cols = ["index", "residual", "bound"]
        if self.distance is not None:
            cols += ["distance", "distance_bound"]
        return cols

    def rows(self):
        cols = [self.index, self.residual, self.bound]
        if self.distance is not None:
            cols += [self.distance, self.distance_bound]
        for vals in zip(*cols):
            yield (int(vals[0]),) + tuple(float(v) for v in vals[1:])


@dataclass(frozen=True, eq=False)
class FixedPointResult:
    """Outcome of a solve.

    ``residual`` is ``rho(residual_scale * (T point - point))``; the strong
    and strict schemes use ``residual_scale = c / 2``.
    """

    point: np.ndarray
    residual: float
    iterations: int
    trace: IterationTrace
    certificate: object
    converged: bool
    scheme: str
    mode: str | None = None
    residual_scale: float = 0.5
    notes: tuple = ()
    info: dict = field(default_factory=dict)


def residual(rho, c, x, Tx):
    """``rho((c/2)(Tx - x))``, zero exactly at fixed points."""
    return rho(0.5 * c * (np.asarray(Tx, dtype=float) - np.asarray(x, dtype=float)))


def _roundoff_floor(rho, scale, x, Tx):
    eps = np.finfo(float).eps
    return rho(scale * ROUNDOFF_ULPS * eps * (np.abs(x) + np.abs(Tx)))


def _check_start(T, rho, x0):
    x = as_element(x0, rho)
    if T.dimension != rho.dimension:
        raise PreconditionError(f"mapping dimension {T.dimension} differs from modular dimension {rho.dimension}")
    if x not in T.domain:
        raise PreconditionError("starting point is not in the domain of the mapping")
    return x


def _refine(step, z, scale_rho, budget):
    """Keep stepping until the iterate stops moving in floating point."""
    for _ in range(budget):
        nz = step(z)
        if scale_rho(nz - z) == 0.0:
            return nz
        z = nz
    return z


def _distance_pass(step, x0, count, ref, scale_rho):
    """``rho(scale (ref - x_m))`` for ``m = 0..count`` along a recomputed orbit."""
    out = np.empty(count + 1)
    x = x0
    for m in range(count + 1):
        out[m] = scale_rho(ref - x)
        if m < count:
            x = step(x)
    return out


# ---------------------------------------------------------------------------
# strong rho-contractions
# ---------------------------------------------------------------------------


def solve_strong(
    T,
    rho,
    cert,
    x0,
    tol=1e-12,
    max_iter=DEFAULT_MAX_ITER,
    mode="theorem_1_1",
    delta2=None,
    reference=None,
    track_distance=True,
):
    """Picard iteration for a strong rho-contraction.

    Parameters
    ----------
    T : Mapping
    rho : ModularFunctional
    cert : StrongContractionCertificate
    x0 : array_like
        Starting point in ``T.domain``; ``r = rho(alpha l (T x0 - x0))``
        must be finite.
    tol : float
        Stop once ``k^m / (1 - k) * r <= tol``; convergence is then
        confirmed by ``rho((c/2)(Tz - z)) <= tol``.
    mode : {"theorem_1_1", "theorem_1_2_i", "theorem_1_2_ii"}
        Which convergence mode justifies the limit.  ``theorem_1_2_i``
        requires ``c >= 1``; ``theorem_1_2_ii`` requires ``c < 1`` and a
        valid ``delta2`` certificate.  In finite dimension all modes run
        the same loop; the mode is recorded metadata.
    reference : array_like, optional
        Fixed point used for the ``distance`` trace columns.  Without it
        the final iterate is refined further and used instead.
    track_distance : bool
        Fill the distance columns (costs a second pass over the orbit).

    Returns
    -------
    FixedPointResult
    """
    if mode not in MODES:
        raise PreconditionError(f"unknown mode {mode!r}; expected one of {MODES}")
    c, l, k = cert.c, cert.l, cert.k
    notes = ["convergence modes coincide in finite dimension; mode is recorded metadata"]
    if mode == "theorem_1_2_i" and c < 1.0:
        raise PreconditionError(f"mode theorem_1_2_i requires c >= 1, got c={c}")
    if mode == "theorem_1_2_ii":
        if not c < 1.0:
            raise PreconditionError(f"mode theorem_1_2_ii requires 0 < c < 1, got c={c}")
        if delta2 is None or not delta2.valid:
            raise PreconditionError("mode theorem_1_2_ii requires a valid Delta_2 certificate")
        notes.append(f"Delta_2 certificate attached (L={delta2.L}, M={delta2.M}, delta={delta2.delta})")
    if not tol > 0:
        raise PreconditionError("tol must be positive")
    x = _check_start(T, rho, x0)
    x_start = x
    alpha = conjugate_exponent(cert)
    Tx = T(x)
    try:
        r = rho(alpha * l * (Tx - x))
    except ModularOverflowError as exc:
        raise SolverError("no admissible starting point: rho(alpha l (T x0 - x0)) is not finite") from exc

    coef = r / (1.0 - k)
    residuals = []
    kpow = 1.0
    m = 0
    try:
        while True:
            residuals.append(rho(c * (Tx - x)))
            x = Tx
            m += 1
            kpow *= k
            if kpow * coef <= tol or m >= max_iter:
                break
            Tx = T(x)
        z = x
        Tz = T(z)
        res = residual(rho, c, z, Tz)
    except ModularOverflowError as exc:
        raise SolverError(f"modular overflow during iteration {m}") from exc

    idx = np.arange(m)
    step_bound = r * k ** idx.astype(float)
    trace_kw = {}
    if track_distance:
        ref = None if reference is None else as_element(reference, rho)
        if ref is None:
            ref = _refine(T, z, lambda d: rho(c * d), budget=m + 64)
            notes.append("distance columns use a refined iterate as reference")
        dist = _distance_pass(T, x_start, m, ref, lambda d: rho(c * d))
        trace_kw = {"distance": dist[:-1], "distance_bound": coef * k ** idx.astype(float)}
    trace = IterationTrace(idx, np.array(residuals), step_bound, r, scheme="strong", **trace_kw)

    floor = _roundoff_floor(rho, 0.5 * c, z, Tz)
    converged = res <= max(tol, floor)
    info = {"r": r, "alpha": alpha, "a_priori_bound": kpow * coef, "roundoff_floor": floor}
    return FixedPointResult(z, res, m, trace, cert, bool(converged), "strong", mode, 0.5 * c, tuple(notes), info)


# ---------------------------------------------------------------------------
# strict rho-contractions under Delta_2
# ---------------------------------------------------------------------------


def select_power(k, delta, L, M, r):
    """Smallest ``p >= 1`` with ``k^p <= delta / (M + r + L delta)``."""
    threshold = delta / (M + r + L * delta)
    p = 1
    kp = k
    while kp > threshold:
        p += 1
        kp *= k
        if p > 100_000:
            raise SolverError("no admissible iterate order below 100000")
    return p


def solve_strict_delta2(
    T,
    rho,
    cert,
    d2,
    x0,
    tol=1e-12,
    max_iter=DEFAULT_MAX_ITER,
    r_target=None,
    burn_in_budget=10_000,
    second_start=None,
    probe_uniqueness=True,
    reference=None,
    track_distance=True,
):
    """Fixed point of a strict rho-contraction using a local Delta_2 certificate.

    Steps:

    1. burn-in: replace ``x0`` by ``T^j x0`` until
       ``r = rho(2c(T x0 - x0)) <= r_target`` (default ``d2.delta``);
    2. choose ``p0``, the first power with ``k^p0 <= delta/(M + r + L delta)``.
       The same test is then repeated with ``r_S = rho(2c(S x0 - x0))`` for
       ``S = T^p0``, raising ``p0`` if needed, so that the Cauchy estimate
       holds for ``S`` itself;
    3. iterate ``S`` with ``k0 = k^p0``; row ``n`` records
       ``rho(c(S^n x0 - x0))`` against ``(1 - (L k0)^n)/(1 - L k0) (M + r_S)``
       and stops once ``k0^n (M + r_S)/(1 - L k0) <= tol/2``;
    4. confirm ``rho((c/2)(Tz - z)) <= tol`` and, unless disabled, rerun
       from a second start and measure ``rho(c(z - z'))``.
    """
    if d2 is None or not d2.valid:
        raise PreconditionError("Delta_2 certificate required")
    if not tol > 0:
        raise PreconditionError("tol must be positive")
    c, k = cert.c, cert.k
    delta, L, M = d2.delta, d2.L, d2.M
    r_target = delta if r_target is None else float(r_target)
    x = _check_start(T, rho, x0)
    x_orig = x
    notes = []
    try:
        burn = 0
        Tx = T(x)
        r = rho(2.0 * c * (Tx - x))
        while r > r_target:
            if burn >= burn_in_budget:
                raise SolverError(f"burn-in budget {burn_in_budget} exhausted with r = {r:.6g} > {r_target:.6g}")
            x = Tx
            Tx = T(x)
            r = rho(2.0 * c * (Tx - x))
            burn += 1

        p0_from_r = select_power(k, delta, L, M, r)
        p0 = p0_from_r
        while True:
            Sx = x
            for _ in range(p0):
                Sx = T(Sx)
            r_S = rho(2.0 * c * (Sx - x))
            if k**p0 <= delta / (M + r_S + L * delta):
                break
            p0 += 1
            if p0 > 100_000:
                raise SolverError("no admissible iterate order below 100000")
        if p0 != p0_from_r:
            notes.append(f"p0 raised from {p0_from_r} to {p0} so the constraint holds for S = T^p0")
        k0 = k**p0
        if L * k0 >= 1.0:
            raise RuntimeError(f"internal error: L k0 = {L * k0} >= 1 after p0 selection")

        S = T.power(p0)
        x_start = x
        Lk = L * k0
        coef = (M + r_S) / (1.0 - Lk)
        disp = []
        bound2 = []
        n = 0
        k0pow = 1.0
        Lkpow = 1.0
        xn = x
        while True:
            xn = S(xn)
            n += 1
            k0pow *= k0
            Lkpow *= Lk
            disp.append(rho(c * (xn - x_start)))
            bound2.append((1.0 - Lkpow) * coef)
            if k0pow * coef <= 0.5 * tol or n >= max_iter:
                break
        z = xn
        Tz = T(z)
        res = residual(rho, c, z, Tz)
    except (ModularOverflowError, OverflowError) as exc:
        raise SolverError("modular overflow during strict iteration") from exc

    idx = np.arange(1, n + 1)
    trace_kw = {}
    if track_distance:
        ref = None if reference is None else as_element(reference, rho)
        if ref is None:
            ref = _refine(S, z, lambda d: rho(c * d), budget=n + 64)
            notes.append("distance columns use a refined iterate as reference")
        dist = _distance_pass(S, x_start, n, ref, lambda d: rho(c * d))
        trace_kw = {"distance": dist[1:], "distance_bound": coef * k0 ** idx.astype(float)}
    trace = IterationTrace(idx, np.array(disp), np.array(bound2), r_S, scheme="strict_delta2", **trace_kw)
    if not trace.compliant:
        notes.append(f"bound (2) fails on {trace.violations().size} rows")

    floor = _roundoff_floor(rho, 0.5 * c, z, Tz)
    converged = bool(res <= max(tol, floor))
    info = {
        "r": r,
        "r_S": r_S,
        "burn_in": burn,
        "p0": p0,
        "p0_from_r": p0_from_r,
        "k0": k0,
        "threshold": delta / (M + r + L * delta),
        "roundoff_floor": floor,
    }

    if probe_uniqueness:
        x1 = _second_start(T, x_orig, second_start)
        other = solve_strict_delta2(
            T, rho, cert, d2, x1, tol, max_iter, r_target, burn_in_budget,
            probe_uniqueness=False, track_distance=False,
        )
        udist = rho(c * (z - other.point))
        info["second_start"] = x1.tolist()
        info["uniqueness_distance"] = udist
        info["uniqueness_ok"] = bool(udist <= 2.0 * max(tol, floor))
        converged = converged and other.converged and info["uniqueness_ok"]

    return FixedPointResult(z, res, n, trace, cert, converged, "strict_delta2", None, 0.5 * c, tuple(notes), info)


def _second_start(T, x0, given):
    if given is not None:
        x1 = np.asarray(given, dtype=float)
        if x1 not in T.domain:
            raise PreconditionError("second starting point is not in the domain")
        return x1
    cand = -x0 - 1.0
    if cand in T.domain:
        return cand
    z = T.domain.star_center
    if z is not None and not np.array_equal(z, x0):
        return np.asarray(z, dtype=float)
    return T.domain.sample(np.random.default_rng(0), 1)[0]


def orbit(T, x0, steps):
    """``[x0, T x0, ..., T^steps x0]`` as an array (small runs only)."""
    out = [np.asarray(x0, dtype=float)]
    for _ in range(steps):
        out.append(T(out[-1]))
    return np.array(out)
