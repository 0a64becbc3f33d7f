"""Sums of integer pairs conditioned on the first coordinate.

Draw N iid pairs (X_i, Y_i) where X is integer valued and Y given
X = x follows a per-x law; condition on S = sum(X_i) hitting a target
k and study U = sum(Y_i) under that conditioning.  This module holds
the pair-model plumbing, exact dynamic programs for P(S = k) and the
conditional law of U, mean matching, and rejection samplers.

An x-law is anything with the IntegerLaw/FiniteLaw surface: pmf,
mean/variance/third_abs_central, support_arrays, sample, char.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.integrate import quad

from .distributions import Family, FiniteLaw, IntegerLaw, poisson

DP_CELL_BUDGET = 10**8
ACCEPTANCE_FLOOR = 1e-6
WARMUP_PROPOSALS = 100_000


class RejectionFloorError(RuntimeError):
    """Acceptance rate fell below the floor after the warmup."""

    def __init__(self, proposals, accepted, floor):
        self.proposals = proposals
        self.accepted = accepted
        self.floor = floor
        super().__init__(
            f"acceptance rate {accepted}/{proposals} fell below {floor} after warmup"
        )


class TabularYGivenX:
    """Per-x finite laws for Y; exact mode for the dynamic programs.

    laws: mapping or callable from x to FiniteLaw.
    """

    exact = True

    def __init__(self, laws):
        self._laws = laws

    def law(self, x: int) -> FiniteLaw:
        law = self._laws(x) if callable(self._laws) else self._laws[x]
        if law is None:
            raise KeyError(f"no y-law for x = {x}")
        return law

    def sample_given(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        x = np.asarray(x)
        out = np.empty(x.shape[0], dtype=np.float64)
        for xv in np.unique(x):
            law = self.law(int(xv))
            idx = np.flatnonzero(x == xv)
            if len(law.values) == 1:
                out[idx] = law.values[0]
                continue
            cum = np.cumsum(law.probs)
            picks = np.searchsorted(cum, rng.random(idx.shape[0]), side="right")
            out[idx] = np.asarray(law.values)[np.minimum(picks, len(law.values) - 1)]
        return out


class IndicatorAtZero:
    """Y = 1{X = 0}; the empty-urn indicator.  Consumes no randomness."""

    exact = True

    def law(self, x: int) -> FiniteLaw:
        return FiniteLaw(values=(1.0,), probs=(1.0,)) if x == 0 else FiniteLaw(values=(0.0,), probs=(1.0,))

    def sample_given(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return (np.asarray(x) == 0).astype(np.float64)


@dataclass(frozen=True)
class PairModel:
    """X-law plus the conditional law of Y given X."""

    x_law: object
    y_given_x: object
    label: str

    def x_support(self, tol: float = 1e-14):
        return self.x_law.support_arrays(tol)

    def sample_pairs(self, count: int, rng: np.random.Generator):
        x = self.x_law.sample(rng, count)
        y = self.y_given_x.sample_given(x, rng)
        return x, y


def occupancy_model(lam: float) -> PairModel:
    """Balls in urns: X ~ Poisson(lam) occupancy of one urn, Y the
    empty-urn indicator.  Conditioning S = k fixes the ball count."""
    return PairModel(x_law=poisson(lam), y_given_x=IndicatorAtZero(), label="occupancy")


@dataclass(frozen=True)
class ConditionedEnsemble:
    """N iid pairs conditioned on sum(X) = target."""

    model: PairModel
    n_summands: int
    target_sum: int

    def __post_init__(self):
        if self.n_summands < 1:
            raise ValueError("need at least one summand")
        lo = self.model.x_law.support_min * self.n_summands
        if self.target_sum < lo:
            raise ValueError(f"target {self.target_sum} unreachable: minimum sum is {lo}")

    @property
    def label(self) -> str:
        return f"{self.model.label}[N={self.n_summands},k={self.target_sum}]"


def mean_match_tilt(kind: str, n_summands: int, target_sum: int) -> ConditionedEnsemble:
    """Pick the summand parameter so E[X] = target/N, removing the
    first-order lattice offset of the local limit.

    occupancy: Poisson rate k/N.  hashing: Borel with offspring mean
    1 - N/k, which needs target > N (the Borel mean is at least 1).
    """
    n, k = n_summands, target_sum
    if kind == "occupancy":
        if k <= 0:
            raise ValueError("occupancy needs a positive ball count")
        return ConditionedEnsemble(occupancy_model(k / n), n, k)
    if kind == "hashing":
        from .hashing import hashing_pair_model

        if k <= n:
            raise ValueError("hashing mean matching needs target > N")
        mu = 1.0 - n / k
        lam = mu * math.exp(-mu)
        return ConditionedEnsemble(hashing_pair_model(lam), n, k)
    raise ValueError(f"unknown family kind {kind!r}")


# ---------------------------------------------------------------------------
# moments


@dataclass(frozen=True)
class MomentProfile:
    """Single-pair moments and the derived conditional-scale numbers
    for an N-fold sum."""

    n_summands: int
    x_mean: float
    x_std: float
    x_rho: float
    y_mean: float
    y_std: float
    y_rho: float
    covariance: float
    correlation: float
    exact: bool
    warnings: tuple[str, ...] = field(default_factory=tuple)

    @property
    def tau(self) -> float:
        return self.y_std * math.sqrt(max(0.0, 1.0 - self.correlation**2))

    @property
    def l1(self) -> float:
        return self.x_rho / (self.x_std**3 * math.sqrt(self.n_summands))

    @property
    def l2(self) -> float:
        return self.y_rho / (self.y_std**3 * math.sqrt(self.n_summands))

    def predicted_conditional_mean(self, target_sum: int) -> float:
        n = self.n_summands
        slope = self.correlation * self.y_std / self.x_std
        return n * self.y_mean + slope * (target_sum - n * self.x_mean)

    def predicted_conditional_var(self) -> float:
        return self.n_summands * self.tau**2


def moment_profile(
    model: PairModel,
    n_summands: int,
    *,
    x_tail_tol: float = 1e-12,
    mc_budget: int = 200_000,
    rng: np.random.Generator | None = None,
) -> MomentProfile:
    """Exact when every y-law on the (truncated) x-support is
    available; otherwise Monte Carlo for the y-side moments."""
    xs, px = model.x_law.support_arrays(x_tail_tol)
    px = px / px.sum()
    x_mean = model.x_law.mean()
    x_std = model.x_law.std()
    x_rho = model.x_law.third_abs_central()
    exact = bool(getattr(model.y_given_x, "exact", False))
    laws = None
    if exact:
        try:
            laws = [model.y_given_x.law(int(x)) for x in xs]
        except (KeyError, ValueError):
            laws = None
            exact = False
    if laws is not None:
        cond_means = np.array([law.mean() for law in laws])
        y_mean = float(np.dot(px, cond_means))
        ey2 = float(
            np.dot(px, [np.dot(np.square(law.values), law.probs) for law in laws])
        )
        y_var = ey2 - y_mean**2
        y_rho = float(
            np.dot(
                px,
                [
                    np.dot(np.abs(np.asarray(law.values) - y_mean) ** 3, law.probs)
                    for law in laws
                ],
            )
        )
        exy = float(np.dot(px * xs, cond_means))
        cov = exy - x_mean * y_mean
    else:
        if rng is None:
            raise ValueError("Monte Carlo moment profile needs an rng")
        x, y = model.sample_pairs(mc_budget, rng)
        y_mean = float(y.mean())
        y_var = float(y.var())
        y_rho = float(np.mean(np.abs(y - y_mean) ** 3))
        cov = float(np.mean((x - x_mean) * (y - y_mean)))
    y_std = math.sqrt(max(y_var, 0.0))
    warnings = []
    if y_std == 0.0:
        corr = 0.0
        warnings.append("y variance vanishes: Y is almost surely constant")
    else:
        corr = cov / (x_std * y_std)
    if abs(corr) > 1.0 - 1e-12:
        warnings.append(
            "correlation saturated: Y is an affine function of X, the conditional scale tau vanishes"
        )
    return MomentProfile(
        n_summands=n_summands,
        x_mean=x_mean,
        x_std=x_std,
        x_rho=x_rho,
        y_mean=y_mean,
        y_std=y_std,
        y_rho=y_rho,
        covariance=cov,
        correlation=corr,
        exact=laws is not None,
        warnings=tuple(warnings),
    )


# ---------------------------------------------------------------------------
# exact dynamic programs


def _x_masses_up_to(x_law, k: int, n_summands: int, tol: float) -> np.ndarray:
    """pmf of X on 0..hi as a dense array, clipped where no admissible
    configuration can use larger values."""
    xs, px = x_law.support_arrays(tol)
    if np.any(xs != np.asarray(xs, dtype=np.int64)):
        raise ValueError("x-law support must be integer for the dynamic programs")
    xs = np.asarray(xs, dtype=np.int64)
    lo = int(x_law.support_min)
    hi_admissible = k - (n_summands - 1) * lo
    keep = xs <= min(hi_admissible, k)
    xs, px = xs[keep], px[keep]
    dense = np.zeros(int(xs.max()) + 1 if len(xs) else 1)
    dense[xs] = px
    return dense


def prob_s_equals_k(
    x_law,
    n_summands: int,
    k: int,
    *,
    method: str = "dp",
    x_tail_tol: float = 1e-18,
    budget: int = DP_CELL_BUDGET,
) -> float:
    """P(sum of N iid X equals k), exact up to the truncated x-tail.

    "dp" iterates N dense convolutions on 0..k; "quadrature"
    integrates the characteristic function over [-pi, pi] and is the
    independent cross-check.
    """
    if method == "quadrature":
        def integrand(u):
            return (np.exp(-1j * u * k) * x_law.char(u) ** n_summands).real

        val, _ = quad(integrand, 0.0, math.pi, limit=800, epsabs=1e-14, epsrel=1e-11)
        return val / math.pi
    if method != "dp":
        raise ValueError(f"unknown method {method!r}")
    if n_summands * (k + 1) > budget:
        raise ValueError(f"dp cost {n_summands * (k + 1)} exceeds budget {budget}")
    px = _x_masses_up_to(x_law, k, n_summands, x_tail_tol)
    dp = np.zeros(k + 1)
    dp[0] = 1.0
    for _ in range(n_summands):
        dp = np.convolve(dp, px)[: k + 1]
    return float(dp[k])


@dataclass(frozen=True)
class LocalLimitReport:
    """Exact point mass against its normal prediction."""

    n_summands: int
    target_sum: int
    p_exact: float
    gaussian_prediction: float
    v_offset: float
    sigma_root_n: float

    @property
    def ratio(self) -> float:
        return self.p_exact / self.gaussian_prediction

    @property
    def scaled_mass(self) -> float:
        return self.p_exact * 2.0 * math.pi * self.sigma_root_n

    @property
    def lower_bound_constant(self) -> float:
        return math.sqrt(2.0 * math.pi) * math.exp(-(self.v_offset**2) / 2.0) / 2.0

    @property
    def lower_bound_holds(self) -> bool:
        """p_exact * 2 pi sigma_X sqrt(N) >= sqrt(2 pi) exp(-v^2/2)/2,
        the computable stand-in for the local-limit floor."""
        return self.scaled_mass >= self.lower_bound_constant


def local_limit_report(x_law, n_summands: int, k: int, **dp_kwargs) -> LocalLimitReport:
    """Exact P(S = k) against exp(-v^2/2) / (sigma sqrt(2 pi N)) where
    v is the standardized offset of k from N E[X]."""
    sigma = x_law.std()
    srn = sigma * math.sqrt(n_summands)
    v = (k - n_summands * x_law.mean()) / srn
    p = prob_s_equals_k(x_law, n_summands, k, **dp_kwargs)
    pred = math.exp(-(v**2) / 2.0) / (srn * math.sqrt(2.0 * math.pi))
    return LocalLimitReport(
        n_summands=n_summands,
        target_sum=k,
        p_exact=p,
        gaussian_prediction=pred,
        v_offset=v,
        sigma_root_n=srn,
    )


@dataclass(frozen=True)
class ConditionalLaw:
    """Exact law of U = sum(Y) given S = k, on a scaled integer grid."""

    ensemble: ConditionedEnsemble
    t_values: np.ndarray
    probs: np.ndarray
    y_scale: int
    p_condition: float

    def mean(self) -> float:
        return float(np.dot(self.t_values, self.probs))

    def variance(self) -> float:
        m = self.mean()
        return float(np.dot((self.t_values - m) ** 2, self.probs))

    def survival(self, t: float) -> float:
        return float(self.probs[self.t_values >= t - 1e-12].sum())


def _common_scale(values, limit: int = 10**6) -> int:
    scale = 1
    for v in values:
        frac = Fraction(float(v)).limit_denominator(limit)
        if abs(float(frac) - float(v)) > 1e-12:
            raise ValueError(f"y value {v} is not rational within 1e-12 at denominator {limit}")
        scale = scale * frac.denominator // math.gcd(scale, frac.denominator)
    return scale


def exact_conditional_pmf(
    ens: ConditionedEnsemble,
    *,
    x_tail_tol: float = 1e-16,
    budget: int = DP_CELL_BUDGET,
) -> ConditionalLaw:
    """Joint dynamic program over (sum X, scaled sum Y); exact up to
    the truncated x-tail.  Needs exact y-laws on the admissible
    x-range."""
    model, n, k = ens.model, ens.n_summands, ens.target_sum
    if not getattr(model.y_given_x, "exact", False):
        raise ValueError("exact conditional pmf needs tabular y-laws")
    px = _x_masses_up_to(model.x_law, k, n, x_tail_tol)
    xs = np.flatnonzero(px)
    laws = {int(x): model.y_given_x.law(int(x)) for x in xs}
    scale = _common_scale([v for law in laws.values() for v in law.values])
    atoms = []  # (x, scaled nonneg int y, weight)
    y_min = min(min(law.values) for law in laws.values())
    if y_min < 0:
        raise ValueError("y-laws must be nonnegative for the joint dynamic program")
    for x, law in laws.items():
        for v, p in zip(law.values, law.probs):
            atoms.append((int(x), int(round(v * scale)), float(p)))
    t_max = n * max(a[1] for a in atoms)
    cells = (k + 1) * (t_max + 1)
    if cells > budget:
        raise ValueError(f"dp table of {cells} cells exceeds budget {budget}")
    dp = np.zeros((k + 1, t_max + 1))
    dp[0, 0] = 1.0
    for _ in range(n):
        new = np.zeros_like(dp)
        for x, ys, w in atoms:
            wx = w * px[x]
            if ys == 0:
                new[x:, :] += wx * dp[: k + 1 - x, :]
            else:
                new[x:, ys:] += wx * dp[: k + 1 - x, : t_max + 1 - ys]
        dp = new
    row = dp[k, :]
    p_cond = float(row.sum())
    if p_cond <= 0.0:
        raise ValueError("target sum has zero probability under the truncated law")
    keep = np.flatnonzero(row > 0.0)
    return ConditionalLaw(
        ensemble=ens,
        t_values=keep / scale,
        probs=row[keep] / p_cond,
        y_scale=scale,
        p_condition=p_cond,
    )


# ---------------------------------------------------------------------------
# rejection sampling


@dataclass(frozen=True)
class RejectionSample:
    """Conditional samples of U plus acceptance accounting.

    `accepted` counts every accepted proposal, including ones past the
    requested sample count that were never materialized, so
    acceptance_rate stays an unbiased binomial estimate of P(S = k).
    """

    ensemble: ConditionedEnsemble
    t: np.ndarray
    proposals: int
    accepted: int
    method: str
    y_rows: np.ndarray | None = None

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposals


def rejection_sample_conditional(
    ens: ConditionedEnsemble,
    count: int,
    rng: np.random.Generator,
    *,
    keep_vectors: bool = False,
    acceptance_floor: float = ACCEPTANCE_FLOOR,
    warmup_proposals: int = WARMUP_PROPOSALS,
    progeny_cap: int | None = None,
) -> RejectionSample:
    """Draw `count` conditional realizations of U = sum(Y) | S = k.

    Poisson x-laws use a factorized proposal: S ~ Poisson(N lam) is
    drawn alone, and accepted proposals are materialized as uniform
    multinomial ball drops, which is the same conditional law.  Other
    x-laws propose full X-vectors.  Acceptance accounting is identical
    in both routes; if the running rate drops below the floor after
    the warmup the sampler gives up.
    """
    model, n, k = ens.model, ens.n_summands, ens.target_sum
    factorized = isinstance(model.x_law, IntegerLaw) and model.x_law.family is Family.POISSON
    sigma = model.x_law.std()
    v = (k - n * model.x_law.mean()) / (sigma * math.sqrt(n))
    p_est = max(math.exp(-(v**2) / 2.0) / (sigma * math.sqrt(2.0 * math.pi * n)), 1e-8)
    t_out = np.empty(count, dtype=np.float64)
    rows_kept = [] if keep_vectors else None
    got = 0
    hits_total = 0
    proposals = 0
    while got < count:
        need = count - got
        batch = int(min(max(1.5 * need / p_est, 2**14), 1e7))
        if factorized:
            s = rng.poisson(n * model.x_law.param, size=batch)
            hits = int((s == k).sum())
            proposals += batch
            hits_total += hits
            chunk = max(1, min(hits, 20_000_000 // n))
            taken = 0
            while taken < hits and got < count:
                rows = rng.multinomial(k, np.full(n, 1.0 / n), size=min(chunk, hits - taken))
                taken += rows.shape[0]
                y = model.y_given_x.sample_given(rows.ravel(), rng).reshape(rows.shape)
                t_rows = y.sum(axis=1)
                use = min(rows.shape[0], count - got)
                t_out[got : got + use] = t_rows[:use]
                if keep_vectors:
                    rows_kept.extend(y[:use])
                got += use
        else:
            rows_cap = max(1024, 20_000_000 // n)
            batch = min(batch, rows_cap)
            x = model.x_law.sample(rng, (batch, n), progeny_cap=progeny_cap)
            proposals += batch
            mask = x.sum(axis=1) == k
            hits = int(mask.sum())
            hits_total += hits
            if hits:
                xa = x[mask]
                y = model.y_given_x.sample_given(xa.ravel(), rng).reshape(xa.shape)
                t_rows = y.sum(axis=1)
                use = min(hits, count - got)
                t_out[got : got + use] = t_rows[:use]
                if keep_vectors:
                    rows_kept.extend(y[:use])
                got += use
        if proposals >= warmup_proposals and (hits_total + 1) / proposals < acceptance_floor:
            raise RejectionFloorError(proposals, hits_total, acceptance_floor)
        if hits_total:
            p_est = max(hits_total / proposals, 1e-8)
    return RejectionSample(
        ensemble=ens,
        t=t_out,
        proposals=proposals,
        accepted=hits_total,
        method="factorized" if factorized else "matrix",
        y_rows=np.array(rows_kept) if keep_vectors else None,
    )


@dataclass(frozen=True)
class ConditionalMomentReport:
    """Empirical conditional mean/variance against the regression
    predictions, with bootstrap intervals."""

    ensemble: ConditionedEnsemble
    n_samples: int
    empirical_mean: float
    empirical_var: float
    predicted_mean: float
    predicted_var: float
    mean_ci: tuple[float, float]
    var_ci: tuple[float, float]

    @property
    def mean_gap(self) -> float:
        return abs(self.empirical_mean - self.predicted_mean)

    @property
    def var_gap_over_sqrt_n(self) -> float:
        return abs(self.empirical_var - self.predicted_var) / math.sqrt(
            self.ensemble.n_summands
        )


def conditional_moment_report(
    ens: ConditionedEnsemble,
    t_samples: np.ndarray,
    profile: MomentProfile | None = None,
    *,
    bootstrap: int = 200,
    rng: np.random.Generator | None = None,
) -> ConditionalMomentReport:
    if profile is None:
        profile = moment_profile(ens.model, ens.n_summands)
    if rng is None:
        rng = np.random.default_rng(0)
    t = np.asarray(t_samples, dtype=np.float64)
    means = np.empty(bootstrap)
    variances = np.empty(bootstrap)
    for b in range(bootstrap):
        idx = rng.integers(0, t.shape[0], size=t.shape[0])
        resampled = t[idx]
        means[b] = resampled.mean()
        variances[b] = resampled.var()
    return ConditionalMomentReport(
        ensemble=ens,
        n_samples=t.shape[0],
        empirical_mean=float(t.mean()),
        empirical_var=float(t.var()),
        predicted_mean=profile.predicted_conditional_mean(ens.target_sum),
        predicted_var=profile.predicted_conditional_var(),
        mean_ci=(float(np.quantile(means, 0.025)), float(np.quantile(means, 0.975))),
        var_ci=(float(np.quantile(variances, 0.025)), float(np.quantile(variances, 0.975))),
    )
