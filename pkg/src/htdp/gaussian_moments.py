"""Moments of the HT total conditional on a unit's selection or non-selection.

These are the quantities needed to reason about an additional Gaussian
mechanism. None of them depends on ``x_i`` itself.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from htdp import errors
from htdp.design import Design, inclusion_probabilities, third_order_slice
from htdp.estimator import Dataset, ht_weights

_VARIANCE_FLOOR = 1e-10
_UNIT_TOLERANCE = 1e-12


@dataclasses.dataclass(frozen=True)
class ConditionalMoments:
    """Conditional mean of the HT total without unit ``i``, and its variance.

    ``E[HT | i in S] = t_minus_i_given_i + x_i / pi_i`` and
    ``E[HT | i not in S] = t_minus_i_given_not_i``. The ``not_i`` fields are
    NaN when ``pi_i = 1`` (the conditioning event has probability zero).
    """

    t_minus_i_given_i: float
    t_minus_i_given_not_i: float
    var_given_i: float
    var_given_not_i: float

    def to_json(self) -> dict:
        def num(v):
            return None if math.isnan(v) else float(v)
        return {"schema": "htdp/1",
                "t_minus_i_given_i": num(self.t_minus_i_given_i),
                "t_minus_i_given_not_i": num(self.t_minus_i_given_not_i),
                "var_given_i": num(self.var_given_i),
                "var_given_not_i": num(self.var_given_not_i)}


def _variance(y: np.ndarray, marginal: np.ndarray, joint: np.ndarray) -> float:
    """``y' (joint - marginal marginal') y`` with a guard against cancellation."""
    value = float(y @ joint @ y - (y @ marginal) ** 2)
    scale = float(np.abs(y) @ joint @ np.abs(y) + (np.abs(y) @ marginal) ** 2)
    if value < -_VARIANCE_FLOOR * max(1.0, scale):
        raise ArithmeticError(f"conditional variance {value} is materially negative")
    return max(value, 0.0)


def conditional_moments(d: Design, x: Dataset, i: int, allow_census: bool = False) -> ConditionalMoments:
    """Conditional-on-selection moments of the HT total for unit ``i``.

    Raises:
      DegenerateInclusion: if ``pi_i = 0``, or ``pi_i = 1`` without
        ``allow_census``.
    """
    if not 0 <= i < d.N:
        raise errors.InvalidDataset(f"unit {i} out of range for N={d.N}")
    probs = inclusion_probabilities(d, 2)
    pi, pi2 = probs.first, probs.second
    pi_i = float(pi[i])
    certain = abs(pi_i - 1.0) <= _UNIT_TOLERANCE
    if pi_i <= 0 or (certain and not allow_census):
        raise errors.DegenerateInclusion(f"pi_{i} = {pi_i}; need 0 < pi_i < 1")

    y = ht_weights(d, x).copy()
    y[i] = 0.0
    keep = np.arange(d.N) != i

    given_i = pi2[i] / pi_i
    joint_given_i = third_order_slice(d, i) / pi_i
    t_i = math.fsum(y * given_i)
    var_i = _variance(y[keep], given_i[keep], joint_given_i[np.ix_(keep, keep)])

    if certain:
        return ConditionalMoments(t_i, math.nan, var_i, math.nan)

    # Summed over the samples that exclude i rather than formed as
    # (pi_jl - pi_ijl) / (1 - pi_i), which loses digits when pi_i is near 1.
    outside = d.indicator[:, i] == 0
    weights = d.probs[outside]
    members = d.indicator[outside]
    p_not_i = math.fsum(weights)
    given_not_i = (weights @ members) / p_not_i
    joint_given_not_i = (members.T * weights) @ members / p_not_i
    t_not_i = math.fsum(y * given_not_i)
    var_not_i = _variance(y[keep], given_not_i[keep], joint_given_not_i[np.ix_(keep, keep)])
    return ConditionalMoments(t_i, t_not_i, var_i, var_not_i)
