"""Integer summand laws: the branching-process size law and its
normalizing function, plus the Poisson and geometric reference
families and the heavy-tail rate bracket."""

import math

import numpy as np
import pytest
import scipy.stats as st

from condlaw import distributions as d

# independently computed by bisecting mu * exp(-mu) = lam to 1e-15
MU_AT_03 = 0.48940222718021497

# Borel(0.3) facts, from the pmf series lam^n n^(n-1) exp(-n*mu) / n!
# summed to machine precision with mu as above
BOREL_03_PMF = {
    1: 0.61299271506896828,
    2: 0.18389781452069049,
    3: 0.082754016534310718,
    4: 0.044135475484965716,
    5: 0.025860630166972099,
}
BOREL_03_MEAN = 1.9584887620591894
BOREL_03_VAR = 3.6764544793960526
BOREL_03_RHO = 28.984058684849612

# closed-form bracket endpoints: kappa = -1 - log(lam) + mu;
# alpha = kappa*sqrt(2); beta = 2*kappa*sqrt((1+1/kappa)(1+(1+log 2)/kappa))
BRACKETS = {
    0.25: (0.38629436111989062, 0.54630272456399933, 3.3957138180413311),
    0.30: (0.20397280432593599, 0.28846110623301219, 3.0226351869491838),
    0.35: (0.049822124498677688, 0.070459124172270826, 2.7054077243717831),
}


def test_tree_function_inverts():
    for lam in np.linspace(0.01, 1 / math.e, 40):
        mu = d.tree_function(float(lam)).mu
        assert 0.0 < mu <= 1.0
        assert abs(mu * math.exp(-mu) - lam) < 1e-12


def test_tree_function_frozen_values():
    assert abs(d.tree_function(0.3).mu - MU_AT_03) < 1e-14
    assert abs(d.tree_function(1 / math.e).mu - 1.0) < 1e-7


def test_tree_function_monotone():
    grid = np.linspace(0.02, 1 / math.e, 25)
    mus = [d.tree_function(float(lam)).mu for lam in grid]
    assert all(a < b for a, b in zip(mus, mus[1:]))


@pytest.mark.parametrize("lam", [0.0, -0.1, 0.3679, 1.0])
def test_tree_function_domain(lam):
    with pytest.raises(ValueError):
        d.tree_function(lam)


def test_borel_pmf_frozen():
    law = d.borel(0.3)
    for n, p in BOREL_03_PMF.items():
        assert abs(law.pmf(n) - p) < 1e-15
    assert law.pmf(0) == 0.0


def test_borel_moments_frozen():
    law = d.borel(0.3)
    assert abs(law.mean() - BOREL_03_MEAN) < 1e-13
    assert abs(law.variance() - BOREL_03_VAR) < 1e-12
    assert abs(law.std() - math.sqrt(BOREL_03_VAR)) < 1e-12
    assert abs(law.third_abs_central() - BOREL_03_RHO) < 1e-9


def test_borel_mass_sums_to_one():
    for lam in (0.1, 0.25, 0.35):
        law = d.borel(lam)
        values, probs = law.support_arrays(1e-14)
        assert abs(probs.sum() - 1.0) < 1e-12
        assert values[0] == 1


def test_borel_moments_blow_up_at_boundary():
    with pytest.raises(ValueError):
        d.borel(1 / math.e).variance()


def test_poisson_matches_scipy():
    law = d.poisson(2.0)
    ks = np.arange(0, 30)
    assert np.allclose(law.pmf(ks), st.poisson(2.0).pmf(ks), atol=1e-15)
    assert abs(law.mean() - 2.0) < 1e-14
    assert abs(law.variance() - 2.0) < 1e-14


def test_geometric_matches_scipy():
    # failure-count convention: support starts at 0
    law = d.geometric(0.4)
    ks = np.arange(0, 25)
    assert np.allclose(law.pmf(ks), st.geom(0.4, loc=-1).pmf(ks), atol=1e-15)
    assert abs(law.mean() - 1.5) < 1e-14
    assert abs(law.variance() - 3.75) < 1e-13


def test_survival_matches_direct_sum():
    law = d.borel(0.3)
    values, probs = law.support_arrays(1e-16)
    for n in (1, 2, 5, 10, 20):
        direct = probs[values >= n].sum()
        assert abs(law.survival(n) - direct) < 1e-14


def test_tail_bound_dominates_survival():
    law = d.borel(0.3)
    for n in range(1, 60):
        assert law.survival(n) <= law.tail_bound(n) + 1e-15


def test_char_basics():
    law = d.borel(0.3)
    assert abs(law.char(0.0) - 1.0) < 1e-12
    s = 0.7
    values, probs = law.support_arrays(1e-14)
    direct = np.sum(probs * np.exp(1j * s * values))
    assert abs(law.char(s) - direct) < 1e-12
    assert abs(law.char(s)) <= 1.0 + 1e-12
    # integer support means 2*pi periodicity
    assert abs(law.char(s + 2 * math.pi) - law.char(s)) < 1e-10


def test_sampler_goodness_of_fit():
    law = d.borel(0.3)
    rng = np.random.default_rng(2024)
    sample = law.sample(rng, 1_000_000)
    edges = list(range(1, 11))
    observed = np.array(
        [np.sum(sample == v) for v in edges] + [np.sum(sample > edges[-1])],
        dtype=np.float64,
    )
    expected = np.array([law.pmf(v) for v in edges] + [law.survival(edges[-1] + 1)])
    expected *= sample.size
    chi2 = float(np.sum((observed - expected) ** 2 / expected))
    p = st.chi2.sf(chi2, df=len(observed) - 1)
    assert p > 1e-4, (chi2, p)


def test_sampler_respects_progeny_cap_error():
    law = d.borel(0.3)
    rng = np.random.default_rng(0)
    with pytest.raises(RuntimeError):
        law.sample(rng, 200_000, progeny_cap=3)


def test_bracket_frozen_values():
    for lam, (kappa, alpha, beta) in BRACKETS.items():
        br = d.tail_bracket(lam)
        assert abs(br.kappa - kappa) < 1e-13
        assert abs(br.alpha - alpha) < 1e-13
        assert abs(br.beta - beta) < 1e-12
        assert 0 < br.alpha < br.beta


@pytest.mark.parametrize("lam", [0.05, 0.17, 0.3679, 0.5])
def test_bracket_domain(lam):
    # admissible window is 1/(2e) <= lam < 1/e
    with pytest.raises(ValueError):
        d.tail_bracket(lam)


def test_tail_rate_curve_converges_to_kappa():
    curve = d.x_tail_rate_check(0.3, 600)
    assert curve.kappa == pytest.approx(BRACKETS[0.3][0], abs=1e-13)
    assert curve.rates.shape == curve.n_values.shape
    # the empirical decay rate -log P(X >= n)/n approaches kappa from
    # above; at n = 600 it is within ten percent
    assert curve.final_ratio < 1.10
    ratios = curve.rates / curve.kappa
    # decreasing toward 1 once past the first support points
    assert np.all(np.diff(ratios[1:]) < 1e-12)
    assert np.all(ratios >= 1.0)


def test_finite_law_basics():
    law = d.FiniteLaw(values=(0, 1, 3), probs=(0.5, 0.25, 0.25))
    assert abs(law.mean() - 1.0) < 1e-15
    assert abs(law.variance() - (0.5 * 1 + 0.25 * 0 + 0.25 * 4)) < 1e-15
    assert abs(law.survival(1) - 0.5) < 1e-15
    rng = np.random.default_rng(1)
    x = law.sample(rng, 20000)
    assert set(np.unique(x)) <= {0.0, 1.0, 3.0}
    assert abs(x.mean() - 1.0) < 0.05


def test_finite_law_validation():
    with pytest.raises(ValueError):
        d.FiniteLaw(values=(0, 1), probs=(0.7, 0.7))
