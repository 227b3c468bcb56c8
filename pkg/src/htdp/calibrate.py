"""Smallest Laplace scale that makes the released HT total (eps, delta)-DP.

Monotonicity of ``delta(eps; b)`` in ``b`` is checked on the geometric scan
rather than assumed.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from typing import Sequence

from htdp import errors
from htdp.design import Design
from htdp.estimator import AdjacentPair, support_bounds
from htdp.laplace_profile import ordered_map, delta_mixtures, pair_mixtures

B_CAP = 1e9
RELATIVE_TOLERANCE = 1e-6
SANDWICH_FACTOR = 1 - 1e-5
_MONOTONE_SLACK = 1e-12


@dataclasses.dataclass(frozen=True)
class CalibrationResult:
    """Outcome of :func:`calibrate_b`.

    Attributes:
      b: calibrated scale.
      delta_at_b: ``delta(eps; b)``, re-evaluated.
      delta_below: ``delta(eps; b * (1 - 1e-5))``, re-evaluated; ``None`` when
        ``b = 0``.
      monotone: False if the bracketing scan saw delta increase with ``b``.
    """

    b: float
    delta_at_b: float
    delta_below: float | None
    monotone: bool

    def to_json(self) -> dict:
        return {"schema": "htdp/1", "b": self.b, "delta_at_b": self.delta_at_b,
                "delta_below": self.delta_below, "monotone": self.monotone}


def delta_at_scale(d: Design, pairs: Sequence[AdjacentPair], eps: float, b: float,
                   jobs: int = 1) -> float:
    """``delta(eps)`` for noise scale ``b``: max over pairs and orientations."""
    def worst(pair):
        mx, mxp = pair_mixtures(d, pair, b)
        return max(delta_mixtures(mx, mxp, eps), delta_mixtures(mxp, mx, eps))
    return max(ordered_map(worst, list(pairs), jobs))


def calibrate_b(d: Design, pairs: Sequence[AdjacentPair], eps: float, delta_target: float,
                jobs: int = 1) -> CalibrationResult:
    """Smallest ``b`` with ``delta(eps; b) <= delta_target`` over ``pairs``.

    Doubles ``b`` from ``1e-6 * (range of HT atoms + 1)`` until feasible, then
    bisects the last bracket to a relative width of ``1e-6``.

    Raises:
      EmptyPairList: no pairs given.
      Infeasible: ``delta_target`` is not reached below ``b = 1e9``.
    """
    if not pairs:
        raise errors.EmptyPairList("calibration needs at least one adjacent pair")
    if eps < 0:
        raise ValueError(f"eps must be >= 0, got {eps}")
    if not 0 <= delta_target < 1:
        raise errors.InvalidDelta(f"delta target must be in [0, 1), got {delta_target}")

    def delta_of(b):
        return delta_at_scale(d, pairs, eps, b, jobs)

    d0 = delta_of(0.0)
    if d0 <= delta_target:
        return CalibrationResult(0.0, d0, None, True)

    lo_t, hi_t = support_bounds(d, [x for p in pairs for x in (p.x, p.x_prime)])
    b = 1e-6 * (hi_t - lo_t + 1.0)
    scanned = [d0]
    prev_b = 0.0
    while True:
        if b > B_CAP:
            raise errors.Infeasible(
                f"delta({eps}; b) stays above {delta_target} up to b = {B_CAP:g}")
        value = delta_of(b)
        scanned.append(value)
        if value <= delta_target:
            break
        prev_b, b = b, 2 * b
    monotone = all(later <= earlier + _MONOTONE_SLACK
                   for earlier, later in zip(scanned, scanned[1:]))
    if not monotone:
        warnings.warn("delta(eps; b) increased somewhere on the scan; "
                      "calibrated b is a local crossing", errors.NonMonotoneDeltaInB)

    lo, hi = prev_b, b
    while hi - lo > RELATIVE_TOLERANCE * hi:
        mid = 0.5 * (lo + hi)
        if delta_of(mid) <= delta_target:
            hi = mid
        else:
            lo = mid
    return CalibrationResult(hi, delta_of(hi), delta_of(hi * SANDWICH_FACTOR), monotone)
