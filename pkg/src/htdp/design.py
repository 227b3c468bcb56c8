"""Enumerable without-replacement sampling designs.

A design is an explicit list of ``(sample, probability)`` pairs over the
population ``{0, ..., N-1}``. Everything downstream (Horvitz-Thompson atoms,
inclusion probabilities, conditional moments) is computed by summing over this
support, so designs are kept small enough to enumerate.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
import threading
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from htdp import errors

SUM_TOLERANCE = 1e-9
RENORMALIZED_TOLERANCE = 1e-12
DEFAULT_ENUMERATION_CAP = 2_000_000


def _canonical_key(sample: frozenset) -> tuple:
    return (len(sample), tuple(sorted(sample)))


class Design:
    """Immutable sampling design with a canonical support ordering.

    Use :func:`make_explicit_design` or :func:`make_srs_design` rather than
    calling the constructor directly; the constructor trusts its input.

    Attributes:
      N: population size.
      samples: support samples as frozensets, sorted by size then
        lexicographically.
      probs: probability of each support sample, aligned with ``samples``.
    """

    def __init__(self, N: int, samples: Sequence[frozenset], probs: np.ndarray,
                 srs: tuple[int, int] | None = None):
        self.N = int(N)
        self.samples = tuple(samples)
        self.probs = np.asarray(probs, dtype=float)
        self.probs.setflags(write=False)
        # (N, n) when the design is simple random sampling; lets callers pick
        # the closed forms.
        self.srs = srs
        indicator = np.zeros((len(self.samples), self.N), dtype=float)
        for row, s in enumerate(self.samples):
            indicator[row, list(s)] = 1.0
        indicator.setflags(write=False)
        self.indicator = indicator
        self._cache: dict[Any, Any] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self.samples)

    def __repr__(self) -> str:
        return f"Design(N={self.N}, support={len(self.samples)})"

    def cached(self, key, compute):
        """Returns ``compute()`` memoized under ``key`` for this design.

        Concurrent readers are fine; the first writer wins and later writers
        reuse its value, so results never depend on scheduling.
        """
        try:
            return self._cache[key]
        except KeyError:
            pass
        value = compute()
        with self._lock:
            return self._cache.setdefault(key, value)

    @property
    def is_census(self) -> bool:
        return len(self.samples) == 1 and len(self.samples[0]) == self.N


def make_explicit_design(samples: Iterable[tuple[Iterable[int], float]],
                         N: int | None = None) -> Design:
    """Builds a design from explicit ``(sample, probability)`` pairs.

    Zero-probability samples are dropped. When the probabilities sum to one
    only within ``SUM_TOLERANCE`` they are renormalized.

    Raises:
      NegativeProbability, ProbabilitiesDoNotSumToOne, DuplicateSample,
      InvalidDesign.
    """
    items = [(frozenset(int(u) for u in s), float(p)) for s, p in samples]
    if not items:
        raise errors.InvalidDesign("design support must be non-empty")
    seen = set()
    for s, p in items:
        if not math.isfinite(p) or p < 0:
            raise errors.NegativeProbability(f"sample {sorted(s)} has probability {p}")
        if s in seen:
            raise errors.DuplicateSample(f"sample {sorted(s)} listed twice")
        seen.add(s)
        if any(u < 0 for u in s):
            raise errors.InvalidDesign(f"negative unit id in sample {sorted(s)}")
    total = math.fsum(p for _, p in items)
    if abs(total - 1.0) > SUM_TOLERANCE:
        raise errors.ProbabilitiesDoNotSumToOne(f"probabilities sum to {total!r}")

    max_id = max((max(s) for s, _ in items if s), default=-1)
    if N is None:
        N = max_id + 1
    elif max_id >= N:
        raise errors.InvalidDesign(f"unit id {max_id} is out of range for N={N}")
    if N <= 0:
        raise errors.InvalidDesign("population size must be positive")

    items = [(s, p) for s, p in items if p > 0]
    items.sort(key=lambda item: _canonical_key(item[0]))
    probs = np.array([p for _, p in items])
    if abs(math.fsum(probs) - 1.0) > RENORMALIZED_TOLERANCE:
        probs = probs / math.fsum(probs)
    return Design(N, [s for s, _ in items], probs)


def make_srs_design(N: int, n: int, cap: int = DEFAULT_ENUMERATION_CAP) -> Design:
    """Simple random sampling of ``n`` units among ``N``, fully enumerated.

    Raises:
      EnumerationTooLarge: if ``C(N, n)`` exceeds ``cap``; use the closed
        forms in :mod:`htdp.srs_binary` instead.
    """
    N, n = int(N), int(n)
    if N <= 0 or not 0 <= n <= N:
        raise errors.InvalidDesign(f"need 0 <= n <= N and N > 0, got N={N}, n={n}")
    count = math.comb(N, n)
    if count > cap:
        raise errors.EnumerationTooLarge(
            f"C({N}, {n}) = {count} samples exceeds the enumeration cap {cap}")
    samples = [frozenset(c) for c in itertools.combinations(range(N), n)]
    probs = np.full(count, 1.0 / count)
    return Design(N, samples, probs, srs=(N, n))


@dataclasses.dataclass(frozen=True)
class InclusionProbs:
    """First, second and (optionally) third order inclusion probabilities.

    ``second`` is a symmetric ``(N, N)`` matrix whose diagonal holds the first
    order probabilities. ``third`` is an ``(N, N, N)`` tensor with the analogous
    convention, or ``None`` if not requested.
    """

    first: np.ndarray
    second: np.ndarray | None = None
    third: np.ndarray | None = None


def _first_order(d: Design) -> np.ndarray:
    return d.cached("pi1", lambda: d.probs @ d.indicator)


def _second_order(d: Design) -> np.ndarray:
    return d.cached("pi2", lambda: (d.indicator * d.probs[:, None]).T @ d.indicator)


def third_order_slice(d: Design, i: int) -> np.ndarray:
    """``(N, N)`` matrix of ``pi_{i,j,l}``, computed once per ``(design, i)``."""
    def compute():
        w = d.probs * d.indicator[:, i]
        return (d.indicator * w[:, None]).T @ d.indicator
    return d.cached(("pi3", int(i)), compute)


def inclusion_probabilities(d: Design, order: int = 2) -> InclusionProbs:
    if order not in (1, 2, 3):
        raise ValueError(f"order must be 1, 2 or 3, got {order}")
    first = _first_order(d)
    if order == 1:
        return InclusionProbs(first)
    second = _second_order(d)
    if order == 2:
        return InclusionProbs(first, second)
    third = np.einsum("s,si,sj,sk->ijk", d.probs, d.indicator, d.indicator, d.indicator)
    return InclusionProbs(first, second, third)


def design_to_json(d: Design) -> dict:
    return {
        "type": "explicit",
        "N": d.N,
        "samples": [{"s": sorted(s), "p": float(p)} for s, p in zip(d.samples, d.probs)],
    }


def design_from_json(obj: Mapping[str, Any], cap: int = DEFAULT_ENUMERATION_CAP) -> Design:
    """Parses the ``explicit`` or ``srs`` design JSON format."""
    if not isinstance(obj, Mapping):
        raise errors.SchemaViolation("design must be a JSON object")
    kind = obj.get("type")
    try:
        if kind == "explicit":
            samples = [(item["s"], item["p"]) for item in obj["samples"]]
            return make_explicit_design(samples, N=obj.get("N"))
        if kind == "srs":
            return make_srs_design(obj["N"], obj["n"], cap=cap)
    except (KeyError, TypeError) as exc:
        raise errors.SchemaViolation(f"malformed {kind} design: {exc!r}") from exc
    raise errors.SchemaViolation(f"unknown design type {kind!r}")
