"""Exact (eps, delta) accounting for the HT total plus Laplace noise.

The released value is ``Z_b = HT + b * W`` with ``W ~ Laplace(0, 1)``. Given
``X = x`` its law is the atom distribution of the HT total convolved with a
Laplace kernel of scale ``b`` (for ``b = 0``, the atoms themselves).

For ``b > 0`` the difference ``f_x - e^eps f_x'`` is, between two consecutive
knots, a combination ``C e^{z/b} + D e^{-z/b}``. It therefore changes sign at
most once per segment and its positive part integrates in closed form. The
implementation never forms ``e^{z/b}`` directly: every accumulated quantity is
re-centred at the current knot, so all exponents are non-positive.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.special import logsumexp

from htdp import errors
from htdp.design import Design
from htdp.estimator import (
    AdjacentPair,
    AtomicDistribution,
    Dataset,
    atom_distribution,
    merge_tolerance,
)

DELTA_FLOOR = 1e-15
EPS_TOLERANCE = 1e-9
DEFAULT_EPS_HI = 50.0
ROOT_SNAP = 1e-12
# e^700 is still finite; larger eps only pushes already-negligible terms further.
_MAX_EXP = 700.0


@dataclasses.dataclass(frozen=True, eq=False)
class LaplaceMixture:
    atoms: AtomicDistribution
    b: float

    def __post_init__(self):
        b = float(self.b)
        if not math.isfinite(b) or b < 0:
            raise ValueError(f"Laplace scale must be finite and >= 0, got {self.b}")
        object.__setattr__(self, "b", b)


def _finish(delta: float) -> float:
    delta = min(max(delta, 0.0), 1.0)
    return 0.0 if delta < DELTA_FLOOR else delta


def align_atoms(fx: AtomicDistribution, fxp: AtomicDistribution):
    """Merges two atom sets into one knot vector with aligned mass vectors.

    Values closer than the merge tolerance are treated as one knot.

    Returns:
      ``(knots, a, c)`` where ``a`` and ``c`` are the masses of ``fx`` and
      ``fxp`` at each knot (zero where a distribution has no atom).
    """
    values = np.concatenate([fx.values, fxp.values])
    owner = np.concatenate([np.zeros(len(fx), int), np.ones(len(fxp), int)])
    masses = np.concatenate([fx.masses, fxp.masses])
    order = np.argsort(values, kind="stable")
    knots: list[float] = []
    a: list[float] = []
    c: list[float] = []
    for v, who, m in zip(values[order], owner[order], masses[order]):
        if not knots or v - knots[-1] > merge_tolerance(knots[-1]):
            knots.append(float(v))
            a.append(0.0)
            c.append(0.0)
        if who == 0:
            a[-1] += m
        else:
            c[-1] += m
    return np.array(knots), np.array(a), np.array(c)


def mixture_density(m: LaplaceMixture, z):
    """Density of the mixture at ``z`` (scalar or array).

    For ``b = 0`` this is the mass at ``z`` (density against counting measure).
    """
    if m.b == 0:
        if np.ndim(z) == 0:
            return m.atoms.mass_at(float(z))
        return np.array([m.atoms.mass_at(float(v)) for v in np.ravel(z)]).reshape(np.shape(z))
    return np.exp(log_mixture_density(m, z))


def log_mixture_density(m: LaplaceMixture, z, chunk: int = 4096):
    """``log f(z)`` for ``b > 0``, computed with log-sum-exp (no underflow)."""
    if m.b == 0:
        raise errors.ZeroScale("log density is only defined for b > 0")
    zz = np.atleast_1d(np.asarray(z, dtype=float))
    log_masses = np.log(m.atoms.masses)
    out = np.empty(zz.shape)
    flat = zz.ravel()
    res = out.ravel()
    for start in range(0, flat.size, chunk):
        block = flat[start:start + chunk]
        exponents = log_masses[None, :] - np.abs(block[:, None] - m.atoms.values[None, :]) / m.b
        res[start:start + chunk] = logsumexp(exponents, axis=1)
    out = res.reshape(zz.shape) - math.log(2 * m.b)
    return float(out[0]) if np.ndim(z) == 0 else out


def delta_discrete(fx: AtomicDistribution, fxp: AtomicDistribution, eps: float) -> float:
    """``sum_z (f_x(z) - e^eps f_x'(z))_+`` for two atom distributions."""
    if eps < 0:
        raise ValueError(f"eps must be >= 0, got {eps}")
    _, a, c = align_atoms(fx, fxp)
    scale = math.exp(min(eps, _MAX_EXP))
    return _finish(math.fsum(np.maximum(a - scale * c, 0.0)))


def _side_sums(knots: np.ndarray, w: np.ndarray, b: float):
    """Left- and right-inclusive decayed sums at every knot.

    ``left[j] = sum_{k<=j} w_k exp(-(u_j - u_k)/b)`` and
    ``right[j] = sum_{k>=j} w_k exp(-(u_k - u_j)/b)``; each recursion step
    rescales by the current knot so nothing overflows.
    """
    K = knots.size
    decay = np.exp(-np.diff(knots) / b)
    left = np.empty(K)
    right = np.empty(K)
    acc = 0.0
    for j in range(K):
        acc = (acc * decay[j - 1] if j else 0.0) + w[j]
        left[j] = acc
    acc = 0.0
    for j in range(K - 1, -1, -1):
        acc = (acc * decay[j] if j < K - 1 else 0.0) + w[j]
        right[j] = acc
    return left, right, decay


def delta_laplace(mx: LaplaceMixture, mxp: LaplaceMixture, eps: float) -> float:
    """Exact ``integral (f_x - e^eps f_x')_+ dz`` for two Laplace mixtures.

    Raises:
      ZeroScale: if ``b = 0`` (use :func:`delta_discrete`).
      MismatchedScales: if the two mixtures use different scales.
    """
    if mx.b != mxp.b:
        raise errors.MismatchedScales(f"scales differ: {mx.b} vs {mxp.b}")
    b = mx.b
    if b == 0:
        raise errors.ZeroScale("b = 0; use delta_discrete")
    if eps < 0:
        raise ValueError(f"eps must be >= 0, got {eps}")
    knots, a, c = align_atoms(mx.atoms, mxp.atoms)
    w = a - math.exp(min(eps, _MAX_EXP)) * c
    left, right, decay = _side_sums(knots, w, b)

    # Beyond the extreme knots the integrand is a single decaying exponential.
    parts = [0.5 * max(right[0], 0.0), 0.5 * max(left[-1], 0.0)]
    for j in range(knots.size - 1):
        gap = knots[j + 1] - knots[j]
        lp = left[j]            # e^{-z/b} part, evaluated at the segment start
        lq = lp * decay[j]
        rq = right[j + 1]       # e^{z/b} part, evaluated at the segment end
        rp = rq * decay[j]
        if lp >= 0 and rq >= 0:
            parts.append(0.5 * ((rq - rp) + (lp - lq)))
            continue
        if lp <= 0 and rq <= 0:
            continue
        # One sign change at s = (b/2) ln(-L(p)/R(p)), measured from the start.
        s = 0.5 * b * (math.log(abs(lp)) - math.log(abs(rq))) + 0.5 * gap
        if s <= ROOT_SNAP * max(1.0, gap):
            s = 0.0
        elif s >= gap - ROOT_SNAP * max(1.0, gap):
            s = gap
        l_root = lp * math.exp(-s / b)
        r_root = rq * math.exp(-(gap - s) / b)
        if rq > 0:
            # increasing: positive on [root, end]
            parts.append(0.5 * ((rq - r_root) + (l_root - lq)))
        else:
            # decreasing: positive on [start, root]
            parts.append(0.5 * ((r_root - rp) + (lp - l_root)))
    return _finish(math.fsum(parts))


def delta_mixtures(mx: LaplaceMixture, mxp: LaplaceMixture, eps: float) -> float:
    """``delta(eps, x, x')`` dispatching on the noise scale."""
    if mx.b == 0 and mxp.b == 0:
        return delta_discrete(mx.atoms, mxp.atoms, eps)
    return delta_laplace(mx, mxp, eps)


def log_density_ratio_sup(mx: LaplaceMixture, mxp: LaplaceMixture) -> float:
    """``log sup_z f_x(z) / f_x'(z)``; ``inf`` when the ratio is unbounded.

    For ``b > 0`` the ratio is piecewise monotone between knots and constant
    beyond the extreme ones, so evaluating it at the knots is enough.
    """
    if mx.b != mxp.b:
        raise errors.MismatchedScales(f"scales differ: {mx.b} vs {mxp.b}")
    knots, a, c = align_atoms(mx.atoms, mxp.atoms)
    if mx.b == 0:
        present = a > 0
        if np.any(present & (c == 0)):
            return math.inf
        return float(np.max(np.log(a[present]) - np.log(c[present])))
    ratio = log_mixture_density(mx, knots) - log_mixture_density(mxp, knots)
    return float(np.max(ratio))


def density_ratio_sup(mx: LaplaceMixture, mxp: LaplaceMixture) -> float:
    log_sup = log_density_ratio_sup(mx, mxp)
    return math.inf if log_sup > _MAX_EXP else math.exp(log_sup)


def epsilon_at_delta(mx: LaplaceMixture, mxp: LaplaceMixture, delta_target: float,
                     eps_hi: float = DEFAULT_EPS_HI) -> float:
    """Smallest eps (to ``EPS_TOLERANCE``) with ``delta(eps, x, x') <= delta_target``.

    Returns ``math.inf`` when even ``eps_hi`` does not reach the target.
    """
    if not 0 < delta_target <= 1:
        raise errors.InvalidDelta(f"delta must be in (0, 1], got {delta_target}")
    return bisect_epsilon(lambda e: delta_mixtures(mx, mxp, e), delta_target, eps_hi)


def bisect_epsilon(delta_of, delta_target: float, eps_hi: float) -> float:
    if delta_of(0.0) <= delta_target:
        return 0.0
    if delta_of(eps_hi) > delta_target:
        return math.inf
    lo, hi = 0.0, float(eps_hi)
    while hi - lo > EPS_TOLERANCE:
        mid = 0.5 * (lo + hi)
        if delta_of(mid) <= delta_target:
            hi = mid
        else:
            lo = mid
    return hi


# --- profiles over adjacent pairs -------------------------------------------

DIRECTIONS = ("x->xp", "xp->x")


@dataclasses.dataclass(frozen=True)
class ProfilePoint:
    eps: float
    delta: float
    pair_index: int
    direction: str
    witness: AdjacentPair


@dataclasses.dataclass(frozen=True)
class PrivacyProfile:
    b: float
    points: tuple[ProfilePoint, ...]

    @property
    def eps(self) -> np.ndarray:
        return np.array([p.eps for p in self.points])

    @property
    def delta(self) -> np.ndarray:
        return np.array([p.delta for p in self.points])


def pair_mixtures(d: Design, pair: AdjacentPair, b: float) -> tuple[LaplaceMixture, LaplaceMixture]:
    return (LaplaceMixture(atom_distribution(d, pair.x), b),
            LaplaceMixture(atom_distribution(d, pair.x_prime), b))


def _pair_deltas(d: Design, pair: AdjacentPair, b: float, eps_grid: Sequence[float]) -> np.ndarray:
    mx, mxp = pair_mixtures(d, pair, b)
    out = np.empty((2, len(eps_grid)))
    for k, eps in enumerate(eps_grid):
        out[0, k] = delta_mixtures(mx, mxp, eps)
        out[1, k] = delta_mixtures(mxp, mx, eps)
    return out


def ordered_map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def profile(d: Design, pairs: Sequence[AdjacentPair], b: float,
            eps_grid: Sequence[float], jobs: int = 1) -> PrivacyProfile:
    """``delta(eps)`` maximized over ``pairs`` in both orientations.

    Ties keep the first witness in (pair index, orientation) order, so the
    output is identical for any ``jobs``.
    """
    if not pairs:
        raise errors.EmptyPairList("profile needs at least one adjacent pair")
    eps_grid = [float(e) for e in eps_grid]
    if any(e < 0 for e in eps_grid):
        raise ValueError("eps grid values must be >= 0")
    if any(b2 < a2 for a2, b2 in zip(eps_grid, eps_grid[1:])):
        raise ValueError("eps grid must be sorted ascending")
    per_pair = ordered_map(lambda p: _pair_deltas(d, p, b, eps_grid), list(pairs), jobs)
    points = []
    for k, eps in enumerate(eps_grid):
        best = (-1.0, 0, 0)
        for idx, deltas in enumerate(per_pair):
            for direction in (0, 1):
                if deltas[direction, k] > best[0]:
                    best = (float(deltas[direction, k]), idx, direction)
        delta, idx, direction = best
        witness = pairs[idx] if direction == 0 else pairs[idx].reversed()
        points.append(ProfilePoint(eps, delta, idx, DIRECTIONS[direction], witness))
    deltas = [p.delta for p in points]
    if any(later > earlier + 1e-12 for earlier, later in zip(deltas, deltas[1:])):
        warnings.warn("privacy profile is not non-increasing in eps", RuntimeWarning)
    return PrivacyProfile(float(b), tuple(points))


def epsilon_for_pairs(d: Design, pairs: Sequence[AdjacentPair], b: float, delta_target: float,
                      eps_hi: float = DEFAULT_EPS_HI) -> float:
    """``eps(delta)`` over all pairs: the largest per-pair, per-orientation value."""
    if not pairs:
        raise errors.EmptyPairList("need at least one adjacent pair")
    worst = 0.0
    for pair in pairs:
        mx, mxp = pair_mixtures(d, pair, b)
        worst = max(worst, epsilon_at_delta(mx, mxp, delta_target, eps_hi),
                    epsilon_at_delta(mxp, mx, delta_target, eps_hi))
    return worst


def epsilon_at_zero_delta(d: Design, pairs: Sequence[AdjacentPair], b: float) -> float:
    """``eps(0)`` over all pairs: log of the largest density ratio, both orientations."""
    if not pairs:
        raise errors.EmptyPairList("need at least one adjacent pair")
    worst = 0.0
    for pair in pairs:
        mx, mxp = pair_mixtures(d, pair, b)
        worst = max(worst, log_density_ratio_sup(mx, mxp), log_density_ratio_sup(mxp, mx))
    return worst


def _bounds_tuple(bounds) -> tuple[float, float, float, float]:
    if isinstance(bounds, Dataset):
        return bounds.bounds
    if isinstance(bounds, Mapping):
        return tuple(float(bounds[k]) for k in ("mx", "Mx", "mt", "Mt"))
    mx, Mx, mt, Mt = bounds
    return float(mx), float(Mx), float(mt), float(Mt)


def extremal_pair_heuristic(d: Design, bounds, i: int, staircase: bool = False) -> list[AdjacentPair]:
    """Candidate worst-case pairs flipping unit ``i`` from ``mx`` to ``Mx``.

    The other units are held constant at ``mx`` or at ``Mx``. With
    ``staircase=True`` every fill with the first ``k`` other units at ``Mx`` and
    the rest at ``mx`` is tried as well, which for binary data reaches every
    adjacent pair of totals. Candidates outside the total bounds are dropped.

    Raises:
      NoFeasiblePair: if the total bounds exclude every candidate.
    """
    mx, Mx, mt, Mt = _bounds_tuple(bounds)
    N = d.N
    if not 0 <= i < N:
        raise errors.InvalidPair(f"unit {i} out of range for N={N}")
    others = [j for j in range(N) if j != i]
    fills = [0, N - 1] if not staircase else list(range(N))
    pairs = []
    seen = set()
    for k in fills:
        base = [mx] * N
        for j in others[:k]:
            base[j] = Mx
        lo, hi = list(base), list(base)
        lo[i], hi[i] = mx, Mx
        key = tuple(lo)
        if key in seen:
            continue
        seen.add(key)
        try:
            pairs.append(AdjacentPair(Dataset(lo, mx, Mx, mt, Mt), Dataset(hi, mx, Mx, mt, Mt), i))
        except errors.InvalidDataset:
            continue
    if not pairs:
        raise errors.NoFeasiblePair(f"no extremal pair at unit {i} satisfies the total bounds")
    return pairs


def extremal_pairs_all_units(d: Design, bounds, staircase: bool = False) -> list[AdjacentPair]:
    """Union of :func:`extremal_pair_heuristic` over every unit."""
    pairs = []
    for i in range(d.N):
        try:
            pairs.extend(extremal_pair_heuristic(d, bounds, i, staircase))
        except errors.NoFeasiblePair:
            continue
    if not pairs:
        raise errors.NoFeasiblePair("no extremal pair satisfies the total bounds")
    return pairs


def json_number(value: float) -> Any:
    """Floats for JSON output; infinities become the string ``"inf"``."""
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return float(value)


def profile_to_json(prof: PrivacyProfile) -> dict:
    return {
        "schema": "htdp/1",
        "b": prof.b,
        "points": [
            {"eps": json_number(p.eps), "delta": p.delta,
             "witness": {"i": p.witness.i, "dir": p.direction, "pair": p.pair_index}}
            for p in prof.points
        ],
    }


def profile_to_csv(prof: PrivacyProfile) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["eps", "delta", "witness_i"])
    for p in prof.points:
        writer.writerow([repr(p.eps), repr(p.delta), p.witness.i])
    return buf.getvalue()
