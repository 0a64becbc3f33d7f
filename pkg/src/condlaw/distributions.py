"""Integer summand laws and their tail geometry.

Three families are supported: Borel(lam) on {1, 2, ...}, Poisson(lam)
and Geometric(p) on {0, 1, ...}.  The Borel law is parameterized by
lam = mu * exp(-mu) with mu in (0, 1]; its mass function is
(mu n)^(n-1) exp(-mu n) / n! and it is sampled as the total progeny of
a branching process with Poisson(mu) offspring.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import gammaln

from . import _kernels

ONE_OVER_E = math.exp(-1.0)
TREE_SOLVER_TOL = 1e-12


@dataclass(frozen=True)
class TreeFunctionValue:
    """Solution mu of mu * exp(-mu) = lam on the principal branch."""

    lam: float
    mu: float

    def __post_init__(self):
        if not 0.0 < self.lam <= ONE_OVER_E:
            raise ValueError(f"lam must lie in (0, 1/e], got {self.lam}")
        if abs(self.mu * math.exp(-self.mu) - self.lam) > TREE_SOLVER_TOL:
            raise ValueError("mu does not solve mu*exp(-mu) = lam to tolerance")


def tree_function(lam: float) -> TreeFunctionValue:
    """Invert lam = mu * exp(-mu) for mu in (0, 1] by bisection.

    The residual |mu exp(-mu) - lam| is at most 1e-12; lam = 1/e maps
    to mu = 1 exactly.
    """
    if not 0.0 < lam <= ONE_OVER_E:
        raise ValueError(f"lam must lie in (0, 1/e], got {lam}")
    if lam == ONE_OVER_E:
        return TreeFunctionValue(lam, 1.0)
    lo, hi = 0.0, 1.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if mid * math.exp(-mid) < lam:
            lo = mid
        else:
            hi = mid
    mu = 0.5 * (lo + hi)
    return TreeFunctionValue(lam, mu)


class Family(Enum):
    BOREL = "borel"
    POISSON = "poisson"
    GEOMETRIC = "geometric"


@dataclass(frozen=True)
class IntegerLaw:
    """One of the three named integer families."""

    family: Family
    param: float

    def __post_init__(self):
        if self.family is Family.BOREL:
            if not 0.0 < self.param <= ONE_OVER_E:
                raise ValueError(f"Borel parameter must lie in (0, 1/e], got {self.param}")
        elif self.family is Family.POISSON:
            if self.param <= 0.0:
                raise ValueError(f"Poisson rate must be positive, got {self.param}")
        elif self.family is Family.GEOMETRIC:
            if not 0.0 < self.param <= 1.0:
                raise ValueError(f"Geometric success probability must lie in (0, 1], got {self.param}")

    @property
    def support_min(self) -> int:
        return 1 if self.family is Family.BOREL else 0

    @property
    def mu(self) -> float:
        """Borel offspring mean; only defined for the Borel family."""
        if self.family is not Family.BOREL:
            raise ValueError("mu is a Borel-only parameter")
        return tree_function(self.param).mu

    def logpmf(self, n):
        n = np.asarray(n, dtype=np.float64)
        if self.family is Family.BOREL:
            mu = self.mu
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.where(
                    n >= 1,
                    (n - 1) * (np.log(mu) + np.log(np.maximum(n, 1))) - mu * n - _lgamma(n + 1),
                    -np.inf,
                )
            return out
        if self.family is Family.POISSON:
            lam = self.param
            return np.where(n >= 0, n * math.log(lam) - lam - _lgamma(n + 1), -np.inf)
        p = self.param
        if p == 1.0:
            return np.where(n == 0, 0.0, -np.inf)
        return np.where(n >= 0, math.log(p) + n * math.log1p(-p), -np.inf)

    def pmf(self, n):
        out = np.exp(self.logpmf(n))
        return out if out.ndim else float(out)

    def mean(self) -> float:
        if self.family is Family.BOREL:
            mu = self.mu
            if mu >= 1.0:
                raise ValueError("Borel mean diverges at lam = 1/e")
            return 1.0 / (1.0 - mu)
        if self.family is Family.POISSON:
            return self.param
        return (1.0 - self.param) / self.param

    def variance(self) -> float:
        if self.family is Family.BOREL:
            mu = self.mu
            if mu >= 1.0:
                raise ValueError("Borel variance diverges at lam = 1/e")
            return mu / (1.0 - mu) ** 3
        if self.family is Family.POISSON:
            return self.param
        return (1.0 - self.param) / self.param**2

    def std(self) -> float:
        return math.sqrt(self.variance())

    def tail_bound(self, n: int) -> float:
        """Rigorous upper bound on P(X >= n)."""
        if self.family is Family.GEOMETRIC:
            if self.param == 1.0:
                return 0.0 if n > 0 else 1.0
            return (1.0 - self.param) ** max(n, 0)
        if self.family is Family.BOREL:
            if n <= 1:
                return 1.0
            r = self.param * math.e
            if r >= 1.0:
                raise ValueError("no geometric tail bound at lam = 1/e")
            return float(self.pmf(n)) / (1.0 - r)
        # Poisson: pmf ratio lam/(j+1) <= lam/(n+1) < 1 beyond the mode
        lam = self.param
        if n <= lam + 1:
            return 1.0
        r = lam / (n + 1)
        return float(self.pmf(n)) / (1.0 - r)

    def truncation_point(self, tol: float) -> int:
        """Smallest n with tail_bound(n) < tol."""
        lo = self.support_min
        hi = max(lo + 1, int(math.ceil(self.param)) + 2)
        while self.tail_bound(hi) >= tol:
            hi *= 2
            if hi > 10**9:
                raise ValueError("truncation point beyond 1e9; tail too heavy for tol")
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self.tail_bound(mid) < tol:
                hi = mid
            else:
                lo = mid
        return hi

    def support_arrays(self, tol: float = 1e-14):
        """(values, probs) for the support truncated where the tail
        bound drops below tol."""
        return _support_arrays(self.family, self.param, tol)

    def survival(self, n):
        """P(X >= n) by backward partial sums of the exact pmf.

        The support extends past the largest requested point until the
        tail bound is 1e-16-relative to the mass there, so the result
        is exact to float rounding even deep in the tail.
        """
        n = np.atleast_1d(np.asarray(n, dtype=np.int64))
        anchor = max(int(n.max()), self.support_min)
        floor = float(self.pmf(anchor))
        if floor <= 0.0:
            raise ValueError(f"survival underflows the float range at n = {anchor}")
        hi = anchor + 1
        while self.tail_bound(hi) > 1e-16 * floor:
            hi = 2 * hi + 16
            if hi > 10**7:
                raise ValueError("survival request beyond the truncation range")
        values, probs = _support_range(self, hi)
        tail = np.concatenate([np.cumsum(probs[::-1])[::-1], [0.0]])
        idx = np.clip(np.searchsorted(values, n, side="left"), 0, len(values))
        out = tail[idx]
        return out if out.shape[0] > 1 else float(out[0])

    def third_abs_central(self) -> float:
        """E|X - EX|^3 by series over the truncated support."""
        m = self.mean()
        values, probs = self.support_arrays(1e-16)
        # extend so the cubic weight cannot hide mass beyond the cut
        hi = self.truncation_point(1e-16 / (1.0 + (values[-1] - m) ** 3))
        if hi > values[-1]:
            values, probs = _support_range(self, int(hi))
        return float(np.sum(probs * np.abs(values - m) ** 3))

    def char(self, u):
        """E exp(iuX) on the grid u."""
        u = np.atleast_1d(np.asarray(u, dtype=np.float64))
        if self.family is Family.POISSON:
            out = np.exp(self.param * (np.exp(1j * u) - 1.0))
        elif self.family is Family.GEOMETRIC:
            p = self.param
            out = p / (1.0 - (1.0 - p) * np.exp(1j * u))
        else:
            values, probs = self.support_arrays(1e-14)
            out = np.exp(1j * np.outer(u, values)) @ probs
        return out if out.shape[0] > 1 else complex(out[0])

    def sample(self, rng: np.random.Generator, size: int, progeny_cap: int | None = None):
        """Draw an int64 sample of the given size."""
        if self.family is Family.POISSON:
            return rng.poisson(self.param, size=size).astype(np.int64)
        if self.family is Family.GEOMETRIC:
            return (rng.geometric(self.param, size=size) - 1).astype(np.int64)
        cap = _kernels.PROGENY_CAP_DEFAULT if progeny_cap is None else progeny_cap
        flat = int(np.prod(size)) if not np.isscalar(size) else int(size)
        out, truncated = _kernels.sample_borel_batch(self.mu, flat, cap, rng)
        if truncated:
            raise RuntimeError(f"{truncated} Borel draws hit the progeny cap {cap}")
        return out.reshape(size) if not np.isscalar(size) else out


def borel(lam: float) -> IntegerLaw:
    return IntegerLaw(Family.BOREL, lam)


def poisson(lam: float) -> IntegerLaw:
    return IntegerLaw(Family.POISSON, lam)


def geometric(p: float) -> IntegerLaw:
    return IntegerLaw(Family.GEOMETRIC, p)


def _lgamma(x):
    return gammaln(np.asarray(x, dtype=np.float64))


@functools.lru_cache(maxsize=64)
def _support_arrays(family: Family, param: float, tol: float):
    law = IntegerLaw(family, param)
    hi = law.truncation_point(tol)
    return _support_range(law, hi)


def _support_range(law: IntegerLaw, hi: int):
    values = np.arange(law.support_min, hi + 1, dtype=np.int64)
    probs = np.exp(law.logpmf(values))
    return values, probs


@dataclass(frozen=True)
class FiniteLaw:
    """Explicit finite-support law on numbers; conditioning plumbing
    and test oracles, not one of the named families."""

    values: tuple[float, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != len(self.probs):
            raise ValueError("values and probs must have equal length")
        if any(p < 0 for p in self.probs):
            raise ValueError("negative probability")
        if abs(sum(self.probs) - 1.0) > 1e-9:
            raise ValueError("probabilities must sum to 1 within 1e-9")
        if list(self.values) != sorted(set(self.values)):
            raise ValueError("values must be strictly increasing")

    @property
    def support_min(self):
        return self.values[0]

    def pmf(self, n):
        table = dict(zip(self.values, self.probs))
        if np.isscalar(n):
            return table.get(float(n), 0.0)
        return np.array([table.get(float(v), 0.0) for v in np.asarray(n).ravel()])

    def mean(self) -> float:
        return float(np.dot(self.values, self.probs))

    def variance(self) -> float:
        m = self.mean()
        return float(np.dot((np.asarray(self.values) - m) ** 2, self.probs))

    def std(self) -> float:
        return math.sqrt(self.variance())

    def third_abs_central(self) -> float:
        m = self.mean()
        return float(np.dot(np.abs(np.asarray(self.values) - m) ** 3, self.probs))

    def tail_bound(self, n: int) -> float:
        return float(np.sum([p for v, p in zip(self.values, self.probs) if v >= n]))

    def truncation_point(self, tol: float):
        return self.values[-1] + 1

    def support_arrays(self, tol: float = 0.0):
        return np.asarray(self.values), np.asarray(self.probs)

    def survival(self, n):
        values = np.asarray(self.values)
        probs = np.asarray(self.probs)
        n = np.atleast_1d(np.asarray(n))
        out = np.array([probs[values >= v].sum() for v in n])
        return out if out.shape[0] > 1 else float(out[0])

    def char(self, u):
        u = np.atleast_1d(np.asarray(u, dtype=np.float64))
        out = np.exp(1j * np.outer(u, np.asarray(self.values))) @ np.asarray(self.probs)
        return out if out.shape[0] > 1 else complex(out[0])

    def sample(self, rng: np.random.Generator, size: int, progeny_cap=None):
        return rng.choice(np.asarray(self.values), size=size, p=self.probs)


@dataclass(frozen=True)
class TailBracket:
    """Decay-rate bracket for a sub-exponential square-root tail:
    log P(Y >= y) / sqrt(y) is squeezed into [-beta, -alpha]."""

    kappa: float
    alpha: float
    beta: float

    def __post_init__(self):
        if not 0.0 < self.kappa <= math.log(2.0):
            raise ValueError(
                f"bracket requires 0 < kappa <= log 2, got kappa={self.kappa}; "
                "the admissible window is 1/(2e) <= lam < 1/e"
            )
        if not self.alpha < self.beta:
            raise ValueError("bracket must satisfy alpha < beta")


def tail_bracket(lam: float) -> TailBracket:
    """Bracket constants for the displacement tail at summand law
    Borel(lam).

    kappa = -log(lam) - 1 is the per-ball exponential rate of the block
    length; the admissible window is lam in [1/(2e), 1/e).
    """
    kappa = -math.log(lam) - 1.0
    if not 0.0 < kappa <= math.log(2.0):
        raise ValueError(
            f"bracket requires 0 < kappa <= log 2, got kappa={kappa}; "
            "the admissible window is 1/(2e) <= lam < 1/e"
        )
    alpha = kappa * math.sqrt(2.0)
    beta = 2.0 * kappa * math.sqrt((1.0 + 1.0 / kappa) * (1.0 + (1.0 + math.log(2.0)) / kappa))
    return TailBracket(kappa=kappa, alpha=alpha, beta=beta)


@dataclass(frozen=True)
class RateCurve:
    """Empirical decay-rate curve (n, -log P(X >= n) / n) against the
    limiting rate kappa."""

    lam: float
    kappa: float
    n_values: np.ndarray
    rates: np.ndarray

    @property
    def final_ratio(self) -> float:
        return float(self.rates[-1] / self.kappa)


def x_tail_rate_check(lam: float, n_max: int) -> RateCurve:
    """Exact-survival decay rates for Borel(lam) at n = 2 .. n_max.

    The curve approaches kappa from above like 1.5 log(n) / n, so the
    ratio to kappa is only near 1 once n is a few hundred.
    """
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    law = borel(lam)
    kappa = -math.log(lam) - 1.0
    n_values = np.arange(2, n_max + 1, dtype=np.int64)
    surv = law.survival(n_values)
    rates = -np.log(surv) / n_values
    return RateCurve(lam=lam, kappa=kappa, n_values=n_values, rates=rates)
