import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from htdp import errors
from htdp.design import inclusion_probabilities, make_srs_design
from htdp.estimator import AtomicDistribution, Dataset, make_pair
from htdp.laplace_profile import (
    LaplaceMixture,
    delta_discrete,
    delta_laplace,
    delta_mixtures,
    density_ratio_sup,
    epsilon_at_delta,
    epsilon_at_zero_delta,
    extremal_pair_heuristic,
    log_density_ratio_sup,
    mixture_density,
    pair_mixtures,
    profile,
    profile_to_csv,
    profile_to_json,
)
from htdp.srs_binary import SrsBinaryConfig, delta_srs_b0

from oracles import (
    delta_by_quadrature,
    laplace_mixture_pdf,
    log_laplace_mixture_pdf,
    random_design,
    random_pair,
)


def atoms(mapping):
    return AtomicDistribution.from_mapping(mapping)


def mix(mapping, b):
    return LaplaceMixture(atoms(mapping), b)


HALF = {0.0: 0.5, 2.0: 0.5}
POINT = {0.0: 1.0}


def srs21_pair():
    return make_pair(Dataset((0, 0), 0, 1, 0, 2), Dataset((0, 1), 0, 1, 0, 2))


# --- mixture_density ---------------------------------------------------------

def test_mixture_density_examples():
    assert mixture_density(mix(POINT, 1.0), 0.0) == pytest.approx(0.5, rel=1e-15)
    assert mixture_density(mix(HALF, 0.0), 2.0) == 0.5
    assert mixture_density(mix(HALF, 0.0), 1.0) == 0.0
    # direct evaluation: 0.5 * 0.5 * e^-1 twice
    assert mixture_density(mix(HALF, 1.0), 1.0) == pytest.approx(0.18393972058572117, rel=1e-14)


def test_mixture_density_matches_direct_sum():
    m = mix({-1.0: 0.2, 0.5: 0.3, 4.0: 0.5}, 0.7)
    z = np.linspace(-5, 9, 101)
    np.testing.assert_allclose(mixture_density(m, z),
                               laplace_mixture_pdf(m.atoms.values, m.atoms.masses, 0.7, z),
                               rtol=1e-12)


# --- delta_discrete ----------------------------------------------------------

def test_delta_discrete_examples():
    for eps in (0.0, 0.3, 5.0):
        assert delta_discrete(atoms(HALF), atoms(HALF), eps) == 0.0
    assert delta_discrete(atoms(POINT), atoms(HALF), 0.0) == 0.5
    assert delta_discrete(atoms(HALF), atoms(POINT), 0.0) == 0.5


def test_delta_discrete_unmatched_atoms_never_vanish():
    for eps in (0.0, 1.0, 50.0, 1e4):
        assert delta_discrete(atoms(HALF), atoms(POINT), eps) == 0.5


# --- delta_laplace -----------------------------------------------------------

def test_delta_laplace_identical_is_zero():
    m = mix(HALF, 0.8)
    assert delta_laplace(m, m, 0.0) == 0.0


@pytest.mark.parametrize("gap,b", [(1.0, 1.0), (3.0, 0.5), (0.2, 2.0)])
def test_delta_laplace_pure_laplace_bound(gap, b):
    x, xp = mix(POINT, b), mix({gap: 1.0}, b)
    assert delta_laplace(x, xp, gap / b) == 0.0
    assert delta_laplace(x, xp, gap / b + 0.1) == 0.0
    # below the bound it is the textbook 1 - exp((eps - gap/b)/2)
    eps = 0.5 * gap / b
    assert delta_laplace(x, xp, eps) == pytest.approx(1 - math.exp((eps - gap / b) / 2), abs=1e-14)


def test_delta_laplace_against_quadrature_example():
    # adaptive Simpson oracle value
    got = delta_laplace(mix(HALF, 0.5), mix(POINT, 0.5), 0.1)
    assert got == pytest.approx(0.4255550807595397, abs=1e-8)


def test_delta_laplace_errors():
    with pytest.raises(errors.MismatchedScales):
        delta_laplace(mix(HALF, 0.5), mix(POINT, 0.6), 0.1)
    with pytest.raises(errors.ZeroScale):
        delta_laplace(mix(HALF, 0.0), mix(POINT, 0.0), 0.1)


def test_delta_laplace_translation_invariant_at_large_offsets():
    # e^{t/b} would overflow here; values must match the unshifted problem
    base_x, base_xp = {0.0: 0.3, 1.5: 0.7}, {0.0: 0.6, 2.5: 0.4}
    for offset, b in [(1e5, 0.01), (-3e4, 0.05), (1e6, 1.0)]:
        ref = delta_laplace(mix(base_x, b), mix(base_xp, b), 0.2)
        shifted = delta_laplace(mix({k + offset: v for k, v in base_x.items()}, b),
                                mix({k + offset: v for k, v in base_xp.items()}, b), 0.2)
        assert ref > 0.1
        assert shifted == pytest.approx(ref, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_delta_laplace_matches_quadrature(seed):
    rng = np.random.default_rng(seed)
    d = random_design(rng)
    pair = random_pair(rng, d.N, binary=bool(rng.integers(2)))
    b = float(10 ** rng.uniform(-1.5, 1.5))
    mx, mxp = pair_mixtures(d, pair, b)
    eps = float(rng.uniform(0, 1)) * log_density_ratio_sup(mx, mxp)
    oracle = delta_by_quadrature(mx.atoms.values, mx.atoms.masses,
                                 mxp.atoms.values, mxp.atoms.masses, b, eps)
    assert delta_laplace(mx, mxp, eps) == pytest.approx(oracle, abs=1e-8)


# --- density ratio -------------------------------------------------------------

def test_density_ratio_sup_examples():
    assert density_ratio_sup(mix(HALF, 0.7), mix(HALF, 0.7)) == pytest.approx(1.0, abs=1e-15)
    assert density_ratio_sup(mix(HALF, 0.0), mix(POINT, 0.0)) == math.inf
    assert density_ratio_sup(mix(POINT, 0.0), mix(HALF, 0.0)) == pytest.approx(2.0, abs=1e-15)


def test_density_ratio_sup_pure_laplace():
    assert log_density_ratio_sup(mix(POINT, 2.0), mix({3.0: 1.0}, 2.0)) == pytest.approx(1.5)


def _tail_log_ratios(mx, mxp):
    b = mx.b
    a_v, a_m, c_v, c_m = mx.atoms.values, mx.atoms.masses, mxp.atoms.values, mxp.atoms.masses
    from scipy.special import logsumexp
    left = logsumexp(np.log(a_m) - a_v / b) - logsumexp(np.log(c_m) - c_v / b)
    right = logsumexp(np.log(a_m) + a_v / b) - logsumexp(np.log(c_m) + c_v / b)
    return left, right


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_knot_maximum_and_tails(seed):
    rng = np.random.default_rng(seed)
    d = random_design(rng)
    pair = random_pair(rng, d.N, binary=bool(rng.integers(2)))
    b = float(10 ** rng.uniform(-1, 1))
    mx, mxp = pair_mixtures(d, pair, b)
    knot_max = log_density_ratio_sup(mx, mxp)
    lo = min(mx.atoms.values[0], mxp.atoms.values[0]) - 10 * b
    hi = max(mx.atoms.values[-1], mxp.atoms.values[-1]) + 10 * b
    grid = np.linspace(lo, hi, 10_000)
    grid_log = (log_laplace_mixture_pdf(mx.atoms.values, mx.atoms.masses, b, grid)
                - log_laplace_mixture_pdf(mxp.atoms.values, mxp.atoms.masses, b, grid))
    assert np.max(grid_log) <= knot_max + 1e-9
    left, right = _tail_log_ratios(mx, mxp)
    assert grid_log[0] == pytest.approx(left, abs=1e-9)
    assert grid_log[-1] == pytest.approx(right, abs=1e-9)
    assert max(left, right) <= knot_max + 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.0, 0.05, 0.4, 3.0]))
def test_delta_invariants(seed, b):
    rng = np.random.default_rng(seed)
    d = random_design(rng)
    pair = random_pair(rng, d.N, binary=bool(rng.integers(2)))
    mx, mxp = pair_mixtures(d, pair, b)
    grid = np.linspace(0, 4, 21)
    deltas = [delta_mixtures(mx, mxp, e) for e in grid]
    assert all(0.0 <= v <= 1.0 for v in deltas)
    assert all(later <= earlier + 1e-12 for earlier, later in zip(deltas, deltas[1:]))
    log_sup = log_density_ratio_sup(mx, mxp)
    if math.isfinite(log_sup):
        assert delta_mixtures(mx, mxp, max(log_sup, 0.0) + 1e-9) == 0.0
    if b == 0:
        pi_i = inclusion_probabilities(d, 1).first[pair.i]
        assert delta_mixtures(mx, mxp, 0.0) <= pi_i + 1e-12


# --- epsilon_at_delta ---------------------------------------------------------

def test_epsilon_at_delta_examples():
    assert epsilon_at_delta(mix(HALF, 0.5), mix(HALF, 0.5), 0.5) == 0.0
    d = make_srs_design(2, 1)
    mx, mxp = pair_mixtures(d, srs21_pair(), 0.0)
    # delta(eps) = (1 - e^eps / 2)_+ in this orientation; a grid scan puts the
    # crossing of 0.25 at ln 1.5
    assert epsilon_at_delta(mx, mxp, 0.25) == pytest.approx(math.log(1.5), abs=1e-8)
    # the reverse orientation keeps an unmatched atom of mass 1/2
    assert epsilon_at_delta(mxp, mx, 0.25) == math.inf
    assert epsilon_at_delta(mix(POINT, 1.0), mix({1.0: 1.0}, 1.0), 1e-12) == pytest.approx(1.0, abs=1e-8)


def test_epsilon_at_delta_rejects_bad_delta():
    with pytest.raises(errors.InvalidDelta):
        epsilon_at_delta(mix(HALF, 1.0), mix(HALF, 1.0), 0.0)


# --- profile -------------------------------------------------------------------

def test_profile_degenerate_pair():
    d = make_srs_design(3, 2)
    x = Dataset((0, 1, 1), 0, 1, 0, 3)
    prof = profile(d, [make_pair(x, x, 0)], 0.7, [0.0, 0.5, 1.0])
    assert list(prof.delta) == [0.0, 0.0, 0.0]


def test_profile_srs21_witness():
    d = make_srs_design(2, 1)
    prof = profile(d, [srs21_pair()], 0.0, [0.0])
    point = prof.points[0]
    assert point.delta == 0.5
    assert point.witness.i == 1
    assert point.direction == "x->xp"
    out = profile_to_json(prof)
    assert out["points"][0] == {"eps": 0.0, "delta": 0.5, "witness": {"i": 1, "dir": "x->xp", "pair": 0}}
    assert profile_to_csv(prof) == "eps,delta,witness_i\n0.0,0.5,1\n"


def test_profile_matches_srs_closed_form():
    d = make_srs_design(4, 2)
    pairs = extremal_pair_heuristic(d, (0, 1, 0, 4), 0, staircase=True)
    assert len(pairs) == 4
    grid = [0.0, 0.25, 1.0]
    prof = profile(d, pairs, 0.0, grid)
    cfg = SrsBinaryConfig(4, 2, 0, 4)
    for point in prof.points:
        assert point.delta == pytest.approx(delta_srs_b0(cfg, point.eps), abs=1e-12)


def test_profile_errors_and_jobs_independence():
    d = random_design(np.random.default_rng(2), N=5, support=10)
    rng = np.random.default_rng(9)
    pairs = [random_pair(rng, 5) for _ in range(6)]
    with pytest.raises(errors.EmptyPairList):
        profile(d, [], 0.0, [0.0])
    one = profile(d, pairs, 0.3, np.linspace(0, 2, 9))
    four = profile(d, pairs, 0.3, np.linspace(0, 2, 9), jobs=4)
    assert one == four


def test_epsilon_at_zero_delta_over_pairs():
    d = make_srs_design(4, 1)
    pairs = extremal_pair_heuristic(d, (0, 1, 1, 3), 0, staircase=True)
    assert epsilon_at_zero_delta(d, pairs, 0.0) == pytest.approx(math.log(2), abs=1e-12)


# --- extremal pairs ---------------------------------------------------------------

def test_extremal_pairs_binary():
    d = make_srs_design(2, 1)
    pairs = extremal_pair_heuristic(d, (0, 1, 0, 2), 0)
    assert [(p.x.x, p.x_prime.x) for p in pairs] == [((0.0, 0.0), (1.0, 0.0)),
                                                       ((0.0, 1.0), (1.0, 1.0))]


def test_extremal_pairs_total_filter():
    d = make_srs_design(4, 2)
    # mt = N*Mx - 1: only the all-ones fill with unit i flipping survives
    pairs = extremal_pair_heuristic(d, (0, 1, 3, 4), 2)
    assert [(p.x.x, p.x_prime.x) for p in pairs] == [((1.0, 1.0, 0.0, 1.0), (1.0, 1.0, 1.0, 1.0))]
    with pytest.raises(errors.NoFeasiblePair):
        extremal_pair_heuristic(make_srs_design(4, 1), (0, 1, 1, 3), 0)


def test_extremal_pairs_continuous_bounds():
    d = make_srs_design(3, 2)
    pairs = extremal_pair_heuristic(d, (0, 1, 0, 3), 1)
    assert len(pairs) == 2
    assert all(p.x.x[1] == 0.0 and p.x_prime.x[1] == 1.0 for p in pairs)
    assert len(extremal_pair_heuristic(d, (0, 1, 0, 3), 1, staircase=True)) == 3


def test_profile_monotone_warning_absent():
    d = make_srs_design(5, 2)
    pairs = extremal_pair_heuristic(d, (0, 1, 0, 5), 0, staircase=True)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        profile(d, pairs, 0.2, np.linspace(0, 3, 13))
