"""Fixed points of rho-nonexpansive maps through approximating sequences.

For a star-shaped domain with center ``z`` and ``beta`` in (0, 1), the map
``S x = (1 - beta) z + beta T x`` satisfies
``rho(lam (Sx - Sy)) <= W(lam beta) rho(x - y)`` for any ``lam`` in
``(1, 1/beta)``, where ``W`` is the growth function of ``rho``.  Under
the regular growth condition ``W(lam beta) < 1``, so ``S`` is a strong
rho-contraction with ``c = lam, l = 1`` and :func:`solve_strong` finds its
fixed point.  Letting ``beta = k_n`` climb to 1 yields ``x_n`` with
``rho(T x_n - x_n) -> 0``; a cluster point of ``T x_n`` is then a fixed
point of ``T``.

:func:`proposition31_solve` handles strict rho-contractions
``rho(Tx - Ty) <= k rho(x - y)`` on a convex set containing 0 by solving
``x = lam_n T x`` along a schedule ``lam_n -> 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .contraction import (
    BOUND_RTOL,
    DEFAULT_MAX_ITER,
    FixedPointResult,
    IterationTrace,
    StrongContractionCertificate,
    solve_strong,
)
from .errors import PreconditionError, SolverError
from .mapping import Mapping
from .modular import ATOL, RTOL, as_element

SCHEDULE_RULES = ("harmonic", "dyadic", "decimal")


@dataclass(frozen=True)
class Schedule:
    """Strictly increasing values in (0, 1) meant to approach 1.

    >>> Schedule.from_rule("dyadic", 3).values
    (0.5, 0.75, 0.875)
    """

    values: tuple
    rule: str = "explicit"

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise PreconditionError("schedule must be nonempty")
        if not all(0.0 < v < 1.0 for v in vals):
            raise PreconditionError("schedule values must lie in (0, 1)")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise PreconditionError("schedule values must be strictly increasing")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_rule(cls, rule, length):
        """``harmonic``: 1 - 1/(n+2), n >= 0; ``dyadic``: 1 - 2^-n and ``decimal``: 1 - 10^-n, n >= 1."""
        length = int(length)
        if length < 1:
            raise PreconditionError("schedule length must be >= 1")
        if rule == "harmonic":
            vals = [1.0 - 1.0 / (n + 2) for n in range(length)]
        elif rule == "dyadic":
            vals = [1.0 - 2.0**-n for n in range(1, length + 1)]
        elif rule == "decimal":
            vals = [1.0 - 10.0**-n for n in range(1, length + 1)]
        else:
            raise PreconditionError(f"unknown schedule rule {rule!r}; expected one of {SCHEDULE_RULES}")
        return cls(tuple(vals), rule)

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, i):
        return self.values[i]

    def to_dict(self):
        if self.rule == "explicit":
            return {"rule": "explicit", "values": list(self.values)}
        return {"rule": self.rule, "length": len(self.values)}

    @classmethod
    def from_dict(cls, d):
        if d.get("rule", "explicit") == "explicit":
            return cls(tuple(d["values"]))
        return cls.from_rule(d["rule"], d["length"])


@dataclass(frozen=True)
class NonexpansiveReport:
    margin: float
    passed: bool
    witness: dict | None
    pair_count: int
    seed: int

    def to_dict(self):
        return {"margin": self.margin, "passed": self.passed, "witness": self.witness,
                "pair_count": self.pair_count, "seed": self.seed}


def certify_nonexpansive(T, rho, pair_count=1000, seed=0):
    """Largest sampled ``rho(Tx - Ty) - rho(x - y)``; passes when it is <= 0 up to tolerance."""
    if pair_count < 1:
        raise PreconditionError("pair_count must be >= 1")
    rng = np.random.default_rng(seed)
    X = T.domain.sample(rng, pair_count)
    Y = T.domain.sample(rng, pair_count)
    TX = np.array([T(x) for x in X])
    TY = np.array([T(y) for y in Y])
    lhs = rho.batch(TX - TY)
    rhs = rho.batch(X - Y)
    excess = lhs - rhs
    j = int(np.argmax(excess))
    margin = float(excess[j])
    passed = bool(np.all(excess <= ATOL + RTOL * np.abs(rhs)))
    witness = None if passed else {"x": X[j].tolist(), "y": Y[j].tolist(), "excess": margin}
    return NonexpansiveReport(margin, passed, witness, pair_count, seed)


def _is_center(domain, z):
    if z not in domain:
        return False
    if domain.is_whole_space or domain.convex:
        return True
    sc = domain.star_center
    return sc is not None and np.array_equal(np.asarray(sc, dtype=float), z)


def segment_solve(T, z, beta, rho, growth, tol, x0=None, max_iter=DEFAULT_MAX_ITER):
    """Like :func:`solve_segment` but returns the full :class:`FixedPointResult`."""
    beta = float(beta)
    if not 0.0 < beta < 1.0:
        raise PreconditionError(f"beta must lie in (0, 1), got {beta}")
    if not growth.regular_growth_ok:
        raise PreconditionError("regular growth condition not certified for this modular")
    z = as_element(z, rho)
    if not _is_center(T.domain, z):
        raise PreconditionError("z is not a star center of the mapping's domain")
    lam = 0.5 * (1.0 + 1.0 / beta)
    w = growth.at(lam * beta)
    if not w < 1.0:
        raise SolverError(f"regular growth violated at lambda*beta = {lam * beta:.6g} (W = {w:.6g})")
    w = max(w, 1e-300)
    shift = (1.0 - beta) * z
    S = Mapping(lambda x: shift + beta * T(x), T.domain, f"segment[{T.name}, beta={beta:.6g}]")
    cert = StrongContractionCertificate(lam, 1.0, w)
    start = z if x0 is None else as_element(x0, rho)
    res = solve_strong(S, rho, cert, start, tol, max_iter, mode="theorem_1_2_i", track_distance=False)
    x = res.point
    seg = rho(x - S(x))
    if not (res.converged and seg <= max(tol, res.info["roundoff_floor"])):
        raise SolverError(
            f"segment equation not solved to tol (rho residual {seg:.3g})",
            trace=res.trace,
            info={"beta": beta, "iterations": res.iterations},
        )
    return res


def solve_segment(T, z, beta, rho, growth, tol, x0=None, max_iter=DEFAULT_MAX_ITER):
    """Solve ``x = (1 - beta) z + beta T x``.

    ``lam`` is fixed at the midpoint of ``(1, 1/beta)``; the contraction
    constant is ``W(lam beta)`` read from ``growth``.  Returns ``x`` with
    ``rho(x - ((1 - beta) z + beta T x)) <= tol``.
    """
    return segment_solve(T, z, beta, rho, growth, tol, x0, max_iter).point


@dataclass(frozen=True, eq=False)
class ApproxFixedPointTrace:
    """Rows of the approximating sequence ``x_n = (1 - k_n) z + k_n T x_n``.

    ``bound`` is ``rho(2(1 - k_n) T x_n) + rho(2(1 - k_n) z)`` and
    ``tau_term`` its first summand, whose decay along the run stands in
    for tau-boundedness of ``T(B)``.
    """

    n: np.ndarray
    k: np.ndarray
    points: np.ndarray
    images: np.ndarray
    residual: np.ndarray
    bound: np.ndarray
    tau_term: np.ndarray
    inner_iterations: np.ndarray
    center: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.n)

    def violations(self, rtol=BOUND_RTOL):
        return np.flatnonzero(self.residual > self.bound * (1.0 + rtol))

    @property
    def compliant(self):
        return self.violations().size == 0

    def tau_bounded(self, decay=0.5, tol=0.0):
        """Heuristic ``rho(2(1 - k_n) T x_n) -> 0``: the last term fell below ``decay`` times the largest."""
        e = self.tau_term
        if e.size < 2:
            return True
        return bool(e[-1] <= tol or e[-1] <= decay * np.max(e))

    def to_iteration_trace(self):
        return IterationTrace(self.n, self.residual, self.bound, float(self.bound[0]) if len(self) else 0.0,
                              scheme="approximating")

    columns = ("n", "k_n", "residual", "bound")

    def rows(self):
        for n, k, r, b in zip(self.n, self.k, self.residual, self.bound):
            yield int(n), float(k), float(r), float(b)


def approximating_sequence(T, z, schedule, rho, growth, tol, x_init=None, max_iter=DEFAULT_MAX_ITER):
    """Solve the segment equation for every ``k_n`` of ``schedule``.

    Inner solves warm-start from the previous ``x_{n-1}``.  A failed inner
    solve raises :class:`SolverError` naming the index, with the rows
    collected so far attached as ``trace``.
    """
    z = as_element(z, rho)
    pts, imgs, res, bnd, tau, inner = [], [], [], [], [], []
    warm = z if x_init is None else as_element(x_init, rho)

    def build():
        m, n = len(pts), z.size
        return ApproxFixedPointTrace(
            np.arange(1, m + 1), np.array(schedule.values[:m]), np.array(pts).reshape(m, n),
            np.array(imgs).reshape(m, n), np.array(res), np.array(bnd), np.array(tau),
            np.array(inner, dtype=int), z,
        )

    for i, kn in enumerate(schedule):
        try:
            out = segment_solve(T, z, kn, rho, growth, tol, x0=warm, max_iter=max_iter)
        except SolverError as exc:
            raise SolverError(f"segment solve failed at n={i + 1} (k_n={kn:.6g}): {exc}", trace=build()) from exc
        x = out.point
        Tx = T(x)
        t1 = rho(2.0 * (1.0 - kn) * Tx)
        pts.append(x)
        imgs.append(Tx)
        res.append(rho(Tx - x))
        bnd.append(t1 + rho(2.0 * (1.0 - kn) * z))
        tau.append(t1)
        inner.append(out.iterations)
        warm = x
    return build()


def _medoid(P, rho):
    """Index of the rho-medoid of the rows of ``P``; ties go to the later row."""
    m = len(P)
    cost = np.array([sum(rho(P[i] - P[j]) for i in range(m)) for j in range(m)])
    best = np.flatnonzero(cost == cost.min())
    return int(best[-1])


def schauder_fixed_point(
    T, domain, schedule, rho, growth, tol, tail=3, bound_cap=1e12, tau_decay=0.5, max_iter=DEFAULT_MAX_ITER
):
    """Fixed point of a rho-nonexpansive map on a closed star-shaped set.

    Runs :func:`approximating_sequence`, checks that ``{T x_n}`` stays
    bounded (the finite-dimensional stand-in for rho-compactness of the
    closure of ``T(B)``), takes the rho-medoid ``y`` of the last ``tail``
    images and certifies it through
    ``rho((Ty - y)/3) <= 2 rho(T x_n' - y) + rho(T x_n' - x_n')``,
    minimised over the tail.  ``converged`` means that bound is ``<= tol``.
    """
    domain = T.domain if domain is None else domain
    if not domain.closed:
        raise PreconditionError("domain must be rho-closed")
    if domain.star_center is None:
        raise PreconditionError("domain must be star-shaped with a declared center")
    z = as_element(domain.star_center, rho)
    seq = approximating_sequence(T, z, schedule, rho, growth, tol, max_iter=max_iter)
    itrace = seq.to_iteration_trace()
    biggest = float(np.max(np.abs(seq.images)))
    if biggest > bound_cap or not seq.tau_bounded(tau_decay, tol):
        raise SolverError(
            "compactness surrogate violated: images T x_n do not stay bounded "
            f"(max |T x_n| = {biggest:.3g}, last tau term {seq.tau_term[-1]:.3g})",
            trace=itrace,
            info={"max_image": biggest},
        )
    t = min(int(tail), len(seq))
    base = len(seq) - t
    P = seq.images[base:]
    j = base + _medoid(P, rho)
    y = seq.images[j]
    ests = [2.0 * rho(seq.images[i] - y) + rho(seq.images[i] - seq.points[i]) for i in range(base, len(seq))]
    i_best = base + int(np.argmin(ests))
    cert_bound = float(min(ests))
    Ty = T(y)
    lhs = rho((Ty - y) / 3.0)
    info = {
        "cluster_index": int(seq.n[j]),
        "certificate_index": int(seq.n[i_best]),
        "certificate_bound": cert_bound,
        "estimate_holds": bool(lhs <= cert_bound * (1.0 + BOUND_RTOL) + ATOL),
        "tau_bounded": True,
        "max_image": biggest,
        "approx_trace": seq,
    }
    notes = (
        "rho-compactness of the closure of T(B) replaced by a boundedness check and finite-dimensional cluster extraction",
    )
    return FixedPointResult(
        y, lhs, int(seq.inner_iterations.sum()), itrace, None, bool(cert_bound <= tol), "schauder",
        None, 1.0 / 3.0, notes, info,
    )


@dataclass(frozen=True, eq=False)
class CauchyPairTrace:
    """Pairs ``n < m`` with ``rho(x_m - x_n)`` against ``(l_m - l_n)/(l_m (1 - k)) sup rho(x_j)``."""

    n: np.ndarray
    m: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray

    def violations(self, rtol=BOUND_RTOL):
        return np.flatnonzero(self.lhs > self.rhs * (1.0 + rtol))

    @property
    def compliant(self):
        return self.violations().size == 0


def proposition31_solve(T, rho, k, schedule, tol, sup_cap=1e8, inner_tol=None, max_iter=DEFAULT_MAX_ITER):
    """Fixed point of ``rho(Tx - Ty) <= k rho(x - y)`` via ``x_n = lam_n T x_n``.

    Requires a convex modular and a convex domain containing 0.  Each
    ``x_n`` solves a strong contraction with ``c = (1 + 1/lam_n)/2``,
    ``l = 1`` and constant ``k (1 + lam_n)/2``.  The running supremum of
    ``rho(x_n)`` must stay below ``sup_cap``; the returned point is the
    last ``x_n``, whose distance to the limit is at most
    ``(1 - lam_N)/(1 - k) sup rho(x_n)`` (reported as ``posterior_bound``).

    The reading adopted for the hypotheses is: rho convex, ``B`` a
    rho-closed convex set with ``0`` in ``B``.
    """
    k = float(k)
    if not 0.0 < k < 1.0:
        raise PreconditionError(f"k must lie in (0, 1), got {k}")
    if not rho.is_convex:
        raise PreconditionError("proposition solver needs a convex modular")
    zero = np.zeros(rho.dimension)
    if zero not in T.domain:
        raise PreconditionError("domain must contain 0")
    if not T.domain.convex:
        raise PreconditionError("domain must be convex")
    inner_tol = tol * 1e-6 if inner_tol is None else float(inner_tol)

    lams = np.array(schedule.values)
    xs, Txs, sizes, inner = [], [], [], []
    running_sup = 0.0
    warm = zero
    for i, lam in enumerate(lams):
        c = 0.5 * (1.0 + 1.0 / lam)
        cert = StrongContractionCertificate(c, 1.0, k * 0.5 * (1.0 + lam))
        S = Mapping(lambda x, _lam=lam: _lam * T(x), T.domain, f"{T.name} scaled by {lam:.6g}")
        res = solve_strong(S, rho, cert, warm, inner_tol, max_iter, mode="theorem_1_2_i", track_distance=False)
        if not res.converged:
            raise SolverError(f"inner solve for lambda_{i + 1} = {lam:.6g} did not converge", trace=res.trace)
        x = res.point
        size = rho(x)
        running_sup = max(running_sup, size)
        if running_sup > sup_cap:
            raise SolverError(
                f"hypothesis sup_(x in A) rho(x) < inf not observed: rho(x_{i + 1}) = {size:.3g} exceeds cap {sup_cap:.3g}",
                info={"index": i + 1, "sup": running_sup},
            )
        xs.append(x)
        Txs.append(T(x))
        sizes.append(size)
        inner.append(res.iterations)
        warm = x

    X = np.array(xs)
    N = len(lams)
    pn, pm, lhs, rhs = [], [], [], []
    for a in range(N):
        for b in range(a + 1, N):
            pn.append(a + 1)
            pm.append(b + 1)
            lhs.append(rho(X[b] - X[a]))
            rhs.append((lams[b] - lams[a]) / (lams[b] * (1.0 - k)) * running_sup)
    pairs = CauchyPairTrace(np.array(pn, dtype=int), np.array(pm, dtype=int), np.array(lhs), np.array(rhs))

    # rho(T x_n - x_n) = rho((1/lam_n - 1) x_n) <= (1/lam_n - 1) sup, valid once 1/lam_n - 1 <= 1
    resid = np.array([rho(Tx - x) for Tx, x in zip(Txs, xs)])
    gap = 1.0 / lams - 1.0
    bound = np.where(gap <= 1.0, gap * running_sup, np.inf)
    trace = IterationTrace(np.arange(1, N + 1), resid, bound, running_sup, scheme="prop31")

    z = X[-1]
    Tz = T(z)
    posterior = (1.0 - lams[-1]) / (1.0 - k) * running_sup
    info = {
        "sup": running_sup,
        "posterior_bound": posterior,
        "pairs": pairs,
        "pairs_compliant": pairs.compliant,
        "inner_iterations": inner,
        "sizes": sizes,
        "points": X,
    }
    converged = bool(posterior <= tol and pairs.compliant)
    return FixedPointResult(
        z, rho((Tz - z) / 3.0), int(sum(inner)), trace, None, converged, "prop31", None, 1.0 / 3.0,
        ("hypotheses read as: rho convex, B convex and rho-closed with 0 in B",), info,
    )
