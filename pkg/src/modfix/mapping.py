"""Self-maps ``T: B -> B`` and the domains ``B`` they act on."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainViolationError, PreconditionError


@dataclass(frozen=True, eq=False)
class Domain:
    """A subset ``B`` of R^n.

    ``contains`` is the membership predicate.  ``lower``/``upper`` describe
    a box (used for sampling and as the predicate when ``contains`` is
    omitted).  ``star_center`` is a point ``z`` with ``a z + b x`` in ``B``
    for every ``x`` in ``B`` and ``a + b = 1``.
    """

    dimension: int
    contains: Callable[[np.ndarray], bool] | None = None
    closed: bool = True
    star_center: np.ndarray | None = None
    convex: bool = False
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    sample_scale: float = 10.0

    @classmethod
    def whole_space(cls, n, star_center=None):
        z = np.zeros(n) if star_center is None else np.asarray(star_center, dtype=float)
        return cls(n, None, True, z, True)

    @classmethod
    def box(cls, lower, upper, star_center=None):
        lo = np.asarray(lower, dtype=float)
        hi = np.asarray(upper, dtype=float)
        if lo.shape != hi.shape or np.any(lo > hi):
            raise PreconditionError("box bounds must have equal shape and lower <= upper")
        z = 0.5 * (lo + hi) if star_center is None else np.asarray(star_center, dtype=float)
        return cls(lo.size, None, True, z, True, lo, hi)

    @property
    def is_whole_space(self):
        return self.contains is None and self.lower is None

    def __contains__(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,) or not np.all(np.isfinite(x)):
            return False
        if self.lower is not None and (np.any(x < self.lower) or np.any(x > self.upper)):
            return False
        if self.contains is not None:
            return bool(self.contains(x))
        return True

    def sample(self, rng, count):
        """Draw ``count`` points of the domain (rejection sampling for predicates)."""
        n = self.dimension
        if self.lower is not None and np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper)):
            pts = rng.uniform(self.lower, self.upper, size=(count, n))
        else:
            U = rng.standard_normal((count, n))
            mags = 10.0 ** rng.uniform(-2.0, math.log10(self.sample_scale), size=(count, 1))
            pts = U * mags
            if self.lower is not None:
                pts = np.clip(pts, self.lower, self.upper)
        if self.contains is None:
            return pts
        keep = [p for p in pts if p in self]
        tries = 0
        while len(keep) < count and tries < 100:
            extra = rng.standard_normal((count, n)) * self.sample_scale
            keep.extend(p for p in extra if p in self)
            tries += 1
        if len(keep) < count:
            raise PreconditionError("could not sample enough points from the domain")
        return np.array(keep[:count])

    def check_star_center(self, count=1000, seed=0):
        """Sample ``a z + b x`` for ``x`` in ``B``; returns ``(ok, witness)``."""
        if self.star_center is None:
            return False, None
        rng = np.random.default_rng(seed)
        z = self.star_center
        if z not in self:
            return False, {"z": z.tolist()}
        X = self.sample(rng, count)
        a = rng.uniform(0.0, 1.0, size=count)
        for ai, x in zip(a, X):
            p = ai * z + (1 - ai) * x
            if p not in self:
                return False, {"x": x.tolist(), "alpha": float(ai)}
        return True, None


@dataclass(frozen=True, eq=False)
class Mapping:
    """A self-map of ``domain``.

    Calling the mapping evaluates ``func`` and, unless the domain is all
    of R^n, raises :class:`DomainViolationError` when the image leaves
    the domain.  ``affine`` holds ``(A, b)`` when the map is ``x -> A x + b``
    so oracles can solve for the fixed point directly.
    """

    func: Callable[[np.ndarray], np.ndarray]
    domain: Domain
    name: str = "T"
    affine: tuple | None = None
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def dimension(self):
        return self.domain.dimension

    def __call__(self, x):
        y = self.func(x)
        if not self.domain.is_whole_space and y not in self.domain:
            raise DomainViolationError(f"{self.name} maps a point outside its domain", point=np.asarray(y))
        return y

    def power(self, p):
        """The iterate ``T^p`` as a new mapping."""
        if p < 1:
            raise PreconditionError("iterate order must be >= 1")
        if p == 1:
            return self

        def func(x, _T=self, _p=p):
            for _ in range(_p):
                x = _T(x)
            return x

        return Mapping(func, self.domain, f"{self.name}^{p}")


def check_self_map(T, count=1000, seed=0):
    """Check ``T(x)`` in ``B`` on sampled ``x`` in ``B``; returns ``(ok, witness)``."""
    rng = np.random.default_rng(seed)
    for x in T.domain.sample(rng, count):
        y = T.func(x)
        if y not in T.domain:
            return False, {"x": x.tolist(), "Tx": np.asarray(y).tolist()}
    return True, None
