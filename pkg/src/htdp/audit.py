"""Monte-Carlo estimate of ``delta(eps, x, x')`` for cross-checking.

With ``Z`` drawn from the release under ``x``,
``delta = E[(1 - e^eps f_x'(Z) / f_x(Z))_+]``. Trials run in fixed-size
blocks; block ``k`` draws from the ``k``-th child of ``SeedSequence(seed)``
(PCG64), so the estimate depends only on ``seed`` and ``trials``.
"""

from __future__ import annotations

import math

import numpy as np

from htdp import errors
from htdp.design import Design
from htdp.estimator import AdjacentPair, atom_distribution, ht_values
from htdp.laplace_profile import LaplaceMixture, align_atoms, log_mixture_density, ordered_map

MIN_TRIALS = 10_000
BLOCK_SIZE = 1 << 16
_MAX_EXP = 700.0


def open_uniform(bitgen: np.random.BitGenerator, size: int) -> np.ndarray:
    """Uniforms strictly inside (0, 1): 53 random bits, offset by half a step."""
    raw = bitgen.random_raw(size)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


def laplace_from_uniform(u: np.ndarray) -> np.ndarray:
    """Standard Laplace draws by inverse CDF."""
    centred = u - 0.5
    return -np.sign(centred) * np.log1p(-2.0 * np.abs(centred))


def _nearest_knot(knots: np.ndarray, values: np.ndarray) -> np.ndarray:
    right = np.clip(np.searchsorted(knots, values), 0, knots.size - 1)
    left = np.maximum(right - 1, 0)
    return np.where(np.abs(knots[left] - values) <= np.abs(knots[right] - values), left, right)


def _block_terms(seed_seq: np.random.SeedSequence, size: int, cdf: np.ndarray,
                 sample_term, ht: np.ndarray, b: float, term_at) -> tuple[float, float]:
    bitgen = np.random.PCG64(seed_seq)
    u_sample = open_uniform(bitgen, size)
    u_noise = open_uniform(bitgen, size)
    idx = np.minimum(np.searchsorted(cdf, u_sample, side="right"), cdf.size - 1)
    if b == 0:
        terms = sample_term[idx]
    else:
        terms = term_at(ht[idx] + b * laplace_from_uniform(u_noise))
    return float(np.sum(terms)), float(np.sum(terms * terms))


def mc_delta(d: Design, pair: AdjacentPair, b: float, eps: float, trials: int, seed: int,
             jobs: int = 1) -> tuple[float, float]:
    """Monte-Carlo ``delta(eps, x, x')`` and its standard error.

    Returns:
      ``(delta_hat, std_err)``.
    """
    if trials < MIN_TRIALS:
        raise errors.InvalidTrials(f"need at least {MIN_TRIALS} trials, got {trials}")
    if b < 0 or not math.isfinite(b):
        raise ValueError(f"b must be finite and >= 0, got {b}")
    fx = atom_distribution(d, pair.x)
    fxp = atom_distribution(d, pair.x_prime)
    ht = ht_values(d, pair.x)
    cdf = np.cumsum(d.probs)
    cdf /= cdf[-1]
    scale = math.exp(min(eps, _MAX_EXP))

    sample_term = None
    term_at = None
    if b == 0:
        knots, a, c = align_atoms(fx, fxp)
        # f_x(Z) > 0 always; f_x'(Z) = 0 simply makes the term 1.
        per_knot = np.where(a > 0, np.maximum(1.0 - scale * c / np.where(a > 0, a, 1.0), 0.0), 0.0)
        sample_term = per_knot[_nearest_knot(knots, ht)]
    else:
        mx, mxp = LaplaceMixture(fx, b), LaplaceMixture(fxp, b)

        def term_at(z):
            log_ratio = log_mixture_density(mxp, z) - log_mixture_density(mx, z)
            return np.maximum(1.0 - np.exp(np.minimum(math.log(scale) + log_ratio, _MAX_EXP)), 0.0)

    n_blocks = -(-trials // BLOCK_SIZE)
    children = np.random.SeedSequence(seed).spawn(n_blocks)
    sizes = [min(BLOCK_SIZE, trials - k * BLOCK_SIZE) for k in range(n_blocks)]
    sums = ordered_map(
        lambda k: _block_terms(children[k], sizes[k], cdf, sample_term, ht, b, term_at),
        list(range(n_blocks)), jobs)
    s1 = math.fsum(s for s, _ in sums)
    s2 = math.fsum(q for _, q in sums)
    mean = s1 / trials
    var = max(s2 - trials * mean * mean, 0.0) / (trials - 1)
    return mean, math.sqrt(var / trials)
