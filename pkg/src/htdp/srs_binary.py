"""Closed forms for simple random sampling on binary data.

Under SRS of size ``n`` from ``N`` with ``x`` in ``{0, 1}^N``, the HT total is
``(N/n) * y`` where ``y`` (the number of sampled ones) is hypergeometric and
depends on ``x`` only through its total ``t``. Adjacent datasets have totals
``t`` and ``t + 1``, so every pairwise quantity reduces to an ``O(N)`` scan
over ``t`` of ``O(n)`` sums.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy.special import gammaln

from htdp import errors
from htdp.estimator import AtomicDistribution
from htdp.laplace_profile import DEFAULT_EPS_HI, LaplaceMixture, bisect_epsilon, delta_laplace

_MAX_EXP = 700.0


@dataclasses.dataclass(frozen=True)
class SrsBinaryConfig:
    """SRS(N, n) with binary data whose total lies in ``[mt, Mt]``."""

    N: int
    n: int
    mt: int
    Mt: int

    def __post_init__(self):
        for name in ("N", "n", "mt", "Mt"):
            value = getattr(self, name)
            if isinstance(value, float) and value.is_integer():
                object.__setattr__(self, name, int(value))
            elif not isinstance(value, (int, np.integer)):
                raise errors.InvalidConfig(f"{name} must be an integer, got {value!r}")
            else:
                object.__setattr__(self, name, int(value))
        if not 0 < self.n <= self.N:
            raise errors.InvalidConfig(f"need 0 < n <= N, got n={self.n}, N={self.N}")
        if not 0 <= self.mt < self.Mt <= self.N:
            raise errors.InvalidConfig(
                f"need 0 <= mt < Mt <= N, got mt={self.mt}, Mt={self.Mt}, N={self.N}")

    def complement(self) -> "SrsBinaryConfig":
        """Same design with 0 and 1 swapped."""
        return SrsBinaryConfig(self.N, self.n, self.N - self.Mt, self.N - self.mt)


def _log_comb(a, b):
    return gammaln(a + 1) - gammaln(b + 1) - gammaln(a - b + 1)


def _hypergeom_pmf(N: int, n: int, t: int) -> np.ndarray:
    """P(y ones drawn) for y = 0..n, zero outside the support, renormalized."""
    y = np.arange(n + 1)
    lo, hi = max(0, n + t - N), min(t, n)
    pmf = np.zeros(n + 1)
    ys = y[lo:hi + 1]
    log_p = _log_comb(t, ys) + _log_comb(N - t, n - ys) - _log_comb(N, n)
    pmf[lo:hi + 1] = np.exp(log_p - log_p.max())
    return pmf / pmf.sum()


def hypergeom_atoms(cfg: SrsBinaryConfig, t: int) -> AtomicDistribution:
    """Law of the HT total given ``t(x) = t``: atoms ``(N/n) y``."""
    if not cfg.mt <= t <= cfg.Mt:
        raise errors.TotalOutOfRange(f"total {t} outside [{cfg.mt}, {cfg.Mt}]")
    pmf = _hypergeom_pmf(cfg.N, cfg.n, t)
    ys = np.nonzero(pmf)[0]
    return AtomicDistribution(cfg.N / cfg.n * ys, pmf[ys])


def _pmf_table(cfg: SrsBinaryConfig) -> np.ndarray:
    return np.stack([_hypergeom_pmf(cfg.N, cfg.n, t) for t in range(cfg.mt, cfg.Mt + 1)])


def delta_srs_b0_witness(cfg: SrsBinaryConfig, eps: float) -> tuple[float, int, int]:
    """Like :func:`delta_srs_b0` but also returns the worst ``(t_x, t_x')``."""
    if eps < 0:
        raise ValueError(f"eps must be >= 0, got {eps}")
    table = _pmf_table(cfg)
    scale = math.exp(min(eps, _MAX_EXP))
    best = (-1.0, cfg.mt, cfg.mt + 1)
    for k in range(table.shape[0] - 1):
        t = cfg.mt + k
        up = math.fsum(np.maximum(table[k] - scale * table[k + 1], 0.0))
        down = math.fsum(np.maximum(table[k + 1] - scale * table[k], 0.0))
        if up > best[0]:
            best = (up, t, t + 1)
        if down > best[0]:
            best = (down, t + 1, t)
    delta = min(best[0], 1.0)
    return (0.0 if delta < 1e-15 else delta), best[1], best[2]


def delta_srs_b0(cfg: SrsBinaryConfig, eps: float) -> float:
    """``delta(eps)`` without added noise, maximized over adjacent totals."""
    return delta_srs_b0_witness(cfg, eps)[0]


def epsilon_srs_b0_delta0(cfg: SrsBinaryConfig) -> float:
    """``eps(0)`` without added noise; ``inf`` when ``min(mt, N - Mt) < n``."""
    N, n, mt, Mt = cfg.N, cfg.n, cfg.mt, cfg.Mt
    if min(mt, N - Mt) < n:
        return math.inf
    return math.log(max((N - Mt + 1) / (N - Mt + 1 - n), (mt + 1) / (mt + 1 - n)))


def epsilon_srs_b0(cfg: SrsBinaryConfig, delta: float, eps_hi: float = DEFAULT_EPS_HI) -> float:
    """Smallest eps with ``delta_srs_b0(cfg, eps) <= delta`` (bisection)."""
    if not 0 < delta <= 1:
        raise errors.InvalidDelta(f"delta must be in (0, 1], got {delta}")
    return bisect_epsilon(lambda e: delta_srs_b0(cfg, e), delta, eps_hi)


def delta_srs_laplace(cfg: SrsBinaryConfig, eps: float, b: float) -> float:
    """``delta(eps)`` with Laplace noise of scale ``b``, over adjacent totals."""
    if b == 0:
        return delta_srs_b0(cfg, eps)
    mixtures = [LaplaceMixture(hypergeom_atoms(cfg, t), b) for t in range(cfg.mt, cfg.Mt + 1)]
    worst = 0.0
    for lo, hi in zip(mixtures, mixtures[1:]):
        worst = max(worst, delta_laplace(lo, hi, eps), delta_laplace(hi, lo, eps))
    return worst
