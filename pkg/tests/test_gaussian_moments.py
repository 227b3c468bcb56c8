import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from htdp import errors
from htdp.design import inclusion_probabilities, make_explicit_design, make_srs_design
from htdp.estimator import Dataset, atom_distribution
from htdp.gaussian_moments import conditional_moments

from oracles import enumerate_conditional_moments, random_design


def test_srs32_constant_data():
    m = conditional_moments(make_srs_design(3, 2), Dataset((1, 1, 1), 0, 1, 0, 3), 0)
    assert m.t_minus_i_given_i == pytest.approx(1.5, abs=1e-12)
    assert m.var_given_i == pytest.approx(0.0, abs=1e-12)
    assert m.t_minus_i_given_not_i == pytest.approx(3.0, abs=1e-12)


def test_srs21():
    m = conditional_moments(make_srs_design(2, 1), Dataset((1, 1), 0, 1, 0, 2), 0)
    assert m.t_minus_i_given_i == pytest.approx(0.0, abs=1e-12)
    assert m.t_minus_i_given_not_i == pytest.approx(2.0, abs=1e-12)
    assert m.var_given_i == pytest.approx(0.0, abs=1e-12)
    assert m.var_given_not_i == pytest.approx(0.0, abs=1e-12)


def test_census_requires_flag():
    d = make_explicit_design([({0, 1, 2}, 1.0)])
    x = Dataset((0.5, 2.0, 1.0), 0, 2, 0, 6)
    with pytest.raises(errors.DegenerateInclusion):
        conditional_moments(d, x, 1)
    m = conditional_moments(d, x, 1, allow_census=True)
    assert m.t_minus_i_given_i == pytest.approx(1.5, abs=1e-12)
    assert m.var_given_i == pytest.approx(0.0, abs=1e-12)
    assert math.isnan(m.t_minus_i_given_not_i) and math.isnan(m.var_given_not_i)
    assert m.to_json()["var_given_not_i"] is None


def test_zero_inclusion_rejected():
    d = make_explicit_design([({0}, 0.5), ({1}, 0.5)], N=3)
    with pytest.raises(errors.DegenerateInclusion):
        conditional_moments(d, Dataset((1, 1, 1), 0, 1, 0, 3), 2)


def _checked_unit(d, rng):
    pi = inclusion_probabilities(d, 1).first
    candidates = [j for j in range(d.N) if 1e-9 < pi[j] < 1 - 1e-9]
    if not candidates:
        return None
    return int(rng.choice(candidates))


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_against_enumeration_and_total_expectation(seed):
    rng = np.random.default_rng(seed)
    d = random_design(rng)
    i = _checked_unit(d, rng)
    if i is None:
        return
    x = Dataset(np.round(rng.random(d.N) * 3, 3), 0, 3, 0, 3 * d.N)
    m = conditional_moments(d, x, i)
    pi = inclusion_probabilities(d, 1).first
    expected = enumerate_conditional_moments(d.samples, d.probs, x.x, i, pi)
    got = (m.t_minus_i_given_i, m.t_minus_i_given_not_i, m.var_given_i, m.var_given_not_i)
    for g, e in zip(got, expected):
        assert abs(g - e) <= 1e-10 * max(1.0, abs(e))

    atoms = atom_distribution(d, x)
    mean_ht = math.fsum(atoms.values * atoms.masses)
    total = pi[i] * (m.t_minus_i_given_i + x.x[i] / pi[i]) + (1 - pi[i]) * m.t_minus_i_given_not_i
    assert abs(total - mean_ht) <= 1e-9 * max(1.0, abs(mean_ht))

    values = list(x.x)
    values[i] = float(rng.random() * 3)
    changed = x.with_values(values)
    again = conditional_moments(d, changed, i)
    assert again == m
