"""Limit diagnostics: the oscillatory-integral representation of the
conditional law, characteristic-function decay audits, normal-distance
sweeps, square-root tail windows, and the single-jump classifier."""

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
import scipy.integrate as integrate
import scipy.stats as st

from condlaw import conditional as c
from condlaw import distributions as d
from condlaw import limits as L
from condlaw.seeds import derive_seed, splitmix64


def occupancy_ensemble(n, k):
    return c.ConditionedEnsemble(c.occupancy_model(2.0), n, k)


# ---------------------------------------------------------------------------
# seeding


def test_derive_seed_frozen():
    assert derive_seed(42, 3, 7) == 5504024118666061669
    assert derive_seed(42, 0, 0) == 4686773210568662455


def test_derive_seed_disjoint():
    seen = {derive_seed(0, w, g) for w in range(40) for g in range(40)}
    assert len(seen) == 1600


def test_derive_seed_validation():
    with pytest.raises(ValueError):
        derive_seed(1, -1, 0)
    with pytest.raises(ValueError):
        derive_seed(1, 0, -2)


def test_splitmix64_is_mask64():
    x = splitmix64((1 << 64) - 1)
    assert 0 <= x < 1 << 64
    assert splitmix64(0) != splitmix64(1)


# ---------------------------------------------------------------------------
# oscillatory integral


def test_psi_at_zero_recovers_point_mass():
    ens = occupancy_ensemble(6, 12)
    psi0 = L.bartlett_psi(ens, 0.0)
    p = c.prob_s_equals_k(ens.model.x_law, 6, 12)
    assert abs(psi0.imag) < 1e-10
    assert abs(psi0.real - 2 * math.pi * p) < 1e-8 * 2 * math.pi * p


def test_psi_derivative_matches_conditional_mean():
    ens = occupancy_ensemble(6, 12)
    psi0 = L.bartlett_psi(ens, 0.0)
    step = 1e-5
    deriv = (L.bartlett_psi(ens, step) - L.bartlett_psi(ens, -step)) / (2 * step)
    centered_mean = (deriv / (1j * psi0)).real
    law = c.exact_conditional_pmf(ens)
    prof = c.moment_profile(ens.model, 1, mc_budget=0)
    expected = float(np.dot(law.t_values, law.probs)) - 6 * prof.y_mean
    assert abs(centered_mean - expected) < 1e-6


def test_psi_rejects_inexact_models():
    ens = c.mean_match_tilt("hashing", 30, 45)
    with pytest.raises(ValueError):
        L.bartlett_psi(ens, 0.0)


# ---------------------------------------------------------------------------
# characteristic-function audit


def test_cf_audit_occupancy_positive():
    audit = L.cf_bound_audit(c.occupancy_model(2.0))
    assert audit.passed
    assert audit.c5 > 0
    assert audit.c_marginal > 0
    assert audit.eta0 == pytest.approx(math.pi)


def test_cf_audit_detects_coarse_lattice():
    # X supported on even integers keeps |E exp(isX)| = 1 at s = pi,
    # so no uniform quadratic decay bound can exist
    x = d.FiniteLaw(values=(0, 2, 4), probs=(0.3, 0.5, 0.2))
    model = c.PairModel(x_law=x, y_given_x=c.IndicatorAtZero(), label="even-lattice")
    audit = L.cf_bound_audit(model)
    assert not audit.passed
    assert audit.c5 <= 1e-12


# ---------------------------------------------------------------------------
# normal distances


def test_kolmogorov_distance_single_point():
    assert L.kolmogorov_distance(np.array([0.0])) == pytest.approx(0.5)


def test_kolmogorov_distance_matches_scipy():
    rng = np.random.default_rng(21)
    x = rng.normal(size=4000)
    ours = L.kolmogorov_distance(x, 0.0, 1.0)
    ref = st.kstest(x, "norm").statistic
    assert abs(ours - ref) < 1e-12


def test_kolmogorov_distance_with_ties():
    x = np.array([0.0, 0.0, 0.0, 1.0])
    # CDF jumps by 0.75 at zero: left gap |0 - 0.5|, right |0.75 - 0.5|
    assert L.kolmogorov_distance(x) == pytest.approx(0.5)


def test_exact_kolmogorov_two_point():
    got = L.exact_kolmogorov_to_normal([-1.0, 1.0], [0.5, 0.5], 0.0, 1.0)
    assert got == pytest.approx(st.norm.cdf(1.0) - 0.5, abs=1e-12)


def test_empirical_vs_discrete_distance():
    values = [0.0, 1.0]
    probs = [0.5, 0.5]
    sample = np.array([0.0] * 500 + [1.0] * 500)
    assert L.empirical_vs_discrete_distance(sample, values, probs) < 1e-12
    skew = np.array([0.0] * 750 + [1.0] * 250)
    assert L.empirical_vs_discrete_distance(skew, values, probs) == pytest.approx(0.25)


def test_dkw_band():
    assert L.dkw_band(1000, 1e-3) == pytest.approx(math.sqrt(math.log(2000) / 2000))


def test_berry_esseen_sweep_scaling():
    rep = L.berry_esseen_sweep(c.occupancy_model(2.0), [50, 100, 200], 4000, master_seed=5)
    assert rep.verdict == "ok"
    assert len(rep.rows) == 3
    for row in rep.rows:
        assert 0 < row.distance < 0.25
    assert rep.flatness_ratio < 2.0


def test_berry_esseen_distance_near_exact_value():
    # at a DP-feasible size, the sampled distance must sit within the
    # empirical-CDF band of the exactly computable distance
    n, k, samples = 50, 100, 8000
    rep = L.berry_esseen_sweep(c.occupancy_model(2.0), [n], samples, master_seed=9)
    row = rep.rows[0]
    ens = occupancy_ensemble(n, k)
    law = c.exact_conditional_pmf(ens)
    prof = c.moment_profile(ens.model, 1, mc_budget=0)
    loc = float(np.dot(law.t_values, law.probs))
    scale = prof.tau * math.sqrt(n)
    exact = L.exact_kolmogorov_to_normal(law.t_values, law.probs, loc, scale)
    assert abs(row.distance - exact) <= L.dkw_band(samples, 1e-6) + 0.01


def test_berry_esseen_reproducible():
    a = L.berry_esseen_sweep(c.occupancy_model(2.0), [50], 2000, master_seed=3)
    b = L.berry_esseen_sweep(c.occupancy_model(2.0), [50], 2000, master_seed=3)
    assert a.rows == b.rows


def test_berry_esseen_rejects_inexact_profile():
    with pytest.raises(ValueError):
        L.berry_esseen_sweep(c.mean_match_tilt("hashing", 10, 15).model, [10], 100)


# ---------------------------------------------------------------------------
# constants ledger


def test_weight_integral_matches_moment_expansion():
    # expand (|s|+|u|+1)^3 into absolute moments of the width-24
    # gaussian weight: M0 = sqrt(24 pi), M1 = 24, M2 = 12 sqrt(24 pi),
    # M3 = 576
    m = {0: math.sqrt(24 * math.pi), 1: 24.0, 2: 12 * math.sqrt(24 * math.pi), 3: 576.0}
    total = 0.0
    for a in range(4):
        for b in range(4 - a):
            cexp = 3 - a - b
            coeff = math.factorial(3) // (
                math.factorial(a) * math.factorial(b) * math.factorial(cexp)
            )
            total += coeff * m[a] * m[b]
    assert L._weight_integral_cube() == pytest.approx(total, rel=1e-8)


def test_constants_ledger_internal_consistency():
    led = L.constants_ledger(c.occupancy_model(2.0), [50, 100])
    e = led.entries()
    assert led.all_finite_positive()
    assert e["C0"] == 98.0
    assert e["eta0"] == pytest.approx(math.pi)
    assert e["epsilon"] == pytest.approx(min(2 / 9 * e["c1"] * e["c2"] ** 3, math.pi))
    assert e["eta"] == pytest.approx(min(2 / 9 * e["c3"] * e["c4"] ** 3, e["eta0"]))
    assert e["N0"] == pytest.approx(max(3.0, e["c2"] ** 6, e["c4"] ** 6))
    assert e["N0_tilde"] == pytest.approx(max(e["N0"], 4 * e["c8"] ** 2 / e["c3_tilde"] ** 2))
    assert e["C"] == pytest.approx(
        e["C1"] + e["C2"] * e["C3"] ** -0.5 * math.sqrt(0.5) * math.exp(-0.5)
    )
    assert e["c6"] < 1.0
    assert e["c1_tilde"] <= e["c1"]
    assert e["c3_tilde"] <= e["c3"]


def test_constants_ledger_c7_c8_quadratures():
    led = L.constants_ledger(c.occupancy_model(2.0), [50])
    e = led.entries()
    c5 = e["c5"]
    i2 = integrate.quad(lambda s: s * s * math.exp(-c5 * s * s / 2), -np.inf, np.inf)[0]
    c7 = e["c2"] ** 2 * e["c3"] * e["c4"] / (2 * e["c5_tilde"]) * i2
    assert e["c7"] == pytest.approx(c7, rel=1e-6)


# ---------------------------------------------------------------------------
# square-root tail windows


@pytest.mark.parametrize("lam", [0.25, 0.30, 0.35])
def test_tail_bracket_small_budget(lam):
    from condlaw.hashing import hashing_pair_model

    rep = L.tail_log_bracket(hashing_pair_model(lam), lam, [20, 40], 300_000, master_seed=11)
    assert rep.alpha == pytest.approx(d.tail_bracket(lam).alpha)
    obs = rep.observable_rows
    assert obs, "tail levels too deep for the smoke budget"
    for row in obs:
        assert row.verdict == "inside"
    assert rep.all_inside


def test_tail_bracket_worker_invariance():
    from condlaw.hashing import hashing_pair_model

    model = hashing_pair_model(0.3)
    serial = L.tail_log_bracket(model, 0.3, [20], 200_000, master_seed=2)
    with ThreadPoolExecutor(max_workers=3) as pool:
        threaded = L.tail_log_bracket(
            model, 0.3, [20], 200_000, master_seed=2, map_fn=pool.map
        )
    assert serial.rows == threaded.rows


def test_tail_bracket_accepts_plain_sampler():
    # a bare callable (count, rng) -> values is also a valid source
    law = d.borel(0.3)

    def sampler(count, rng):
        return law.sample(rng, count).astype(np.float64)

    rep = L.tail_log_bracket(sampler, 0.3, [10, 20], 200_000, master_seed=7)
    # X itself decays at rate kappa, faster than any sqrt window, so
    # normalized values fall below -alpha but the machinery must still
    # count hits deterministically
    again = L.tail_log_bracket(sampler, 0.3, [10, 20], 200_000, master_seed=7)
    assert rep.rows == again.rows


def test_conditional_ld_inside_window():
    ens = c.mean_match_tilt("hashing", 20, 30)
    rep = L.conditional_ld_check(ens, [0.5], 150_000, master_seed=3)
    row = rep.rows[0]
    assert row.hits >= 30
    assert row.verdict == "inside"


def test_conditional_ld_requires_bracket():
    ens = occupancy_ensemble(20, 40)
    with pytest.raises(ValueError):
        L.conditional_ld_check(ens, [1.0], 10_000)
    rep = L.conditional_ld_check(
        ens, [1.0], 10_000, bracket=d.tail_bracket(0.3), master_seed=1
    )
    assert rep.rows[0].verdict in ("inside", "outside", "unobservable")


def test_big_jump_single_share_grows():
    from condlaw.hashing import hashing_pair_model

    rep = L.big_jump_diagnostic(
        hashing_pair_model(0.3), [20, 40, 60], 400_000, n_summands=20, master_seed=6
    )
    shares = [row.single_share for row in rep.rows]
    hits = [row.hits for row in rep.rows]
    assert min(hits) >= 100
    assert all(s > 0.5 for s in shares)
    assert all(b >= a - 1e-12 for a, b in zip(shares, shares[1:]))
    assert rep.big_jump_fraction == pytest.approx(shares[-1])
    for row in rep.rows:
        assert row.zero_share + row.single_share + row.multi_share == pytest.approx(1.0)


def test_big_jump_no_bracket_verdict():
    rep = L.big_jump_diagnostic(
        c.occupancy_model(2.0), [4.0], 200_000, n_summands=50, master_seed=1
    )
    row = rep.rows[0]
    assert math.isnan(rep.alpha)
    if row.hits >= 30:
        assert row.verdict == "no-bracket"


def test_big_jump_light_tail_stays_multi():
    # occupancy excess spreads over many cells: a single summand can
    # contribute at most 1, so no single jump of size z/2 >= 2 exists
    rep = L.big_jump_diagnostic(
        c.occupancy_model(2.0), [6.0], 150_000, n_summands=30, master_seed=2
    )
    row = rep.rows[0]
    if row.hits:
        assert row.single_share == 0.0


def test_big_jump_needs_summand_count():
    from condlaw.hashing import hashing_pair_model

    with pytest.raises(ValueError):
        L.big_jump_diagnostic(hashing_pair_model(0.3), [10], 1000)


# ---------------------------------------------------------------------------
# adversarial lower-bound mass


def test_adversarial_bound_holds_everywhere():
    for m in range(2, 9):
        for k in range(0, m // 2 + 1):
            chk = L.adversarial_mass_bound(0.3, m, k)
            assert chk.holds
            assert chk.displacement_target == k * (m - k)
            assert chk.log_lower_bound <= chk.log_enumerated_tail + 1e-9


def test_adversarial_bound_cap():
    with pytest.raises(ValueError):
        L.adversarial_mass_bound(0.3, 14, 3)


def test_enumerated_tail_unreachable():
    with pytest.raises(ValueError):
        L.enumerated_block_tail(0.3, 10**9)
