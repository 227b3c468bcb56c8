"""Horvitz-Thompson values and the exact law of the noiseless estimator."""

from __future__ import annotations

import dataclasses
import math
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from htdp import errors
from htdp.design import Design, InclusionProbs, inclusion_probabilities

MERGE_RTOL = 1e-9
_BOUND_TOL = 1e-9


def merge_tolerance(value: float) -> float:
    return MERGE_RTOL * max(1.0, abs(value))


@dataclasses.dataclass(frozen=True)
class Dataset:
    """A population vector together with its value and total bounds."""

    x: tuple[float, ...]
    mx: float
    Mx: float
    mt: float
    Mt: float

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        for name in ("mx", "Mx", "mt", "Mt"):
            object.__setattr__(self, name, float(getattr(self, name)))
        N = len(self.x)
        if N == 0:
            raise errors.InvalidDataset("dataset must have at least one unit")
        tol = _BOUND_TOL * max(1.0, abs(self.mt), abs(self.Mt))
        if not self.mx <= self.Mx:
            raise errors.InvalidDataset(f"mx={self.mx} exceeds Mx={self.Mx}")
        if not (N * self.mx - tol <= self.mt < self.Mt <= N * self.Mx + tol):
            raise errors.InvalidDataset(
                f"total bounds violate N*mx <= mt < Mt <= N*Mx: "
                f"N={N}, mx={self.mx}, Mx={self.Mx}, mt={self.mt}, Mt={self.Mt}")
        bad = [v for v in self.x if not self.mx <= v <= self.Mx]
        if bad:
            raise errors.InvalidDataset(f"values {bad} outside [{self.mx}, {self.Mx}]")
        total = math.fsum(self.x)
        if not self.mt - tol <= total <= self.Mt + tol:
            raise errors.InvalidDataset(
                f"total {total} outside [{self.mt}, {self.Mt}]")

    @property
    def N(self) -> int:
        return len(self.x)

    @property
    def total(self) -> float:
        return math.fsum(self.x)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return (self.mx, self.Mx, self.mt, self.Mt)

    def with_values(self, x: Sequence[float]) -> "Dataset":
        return Dataset(tuple(x), self.mx, self.Mx, self.mt, self.Mt)

    def array(self) -> np.ndarray:
        return np.asarray(self.x, dtype=float)


@dataclasses.dataclass(frozen=True)
class AdjacentPair:
    """Two datasets in the same domain differing at most at unit ``i``."""

    x: Dataset
    x_prime: Dataset
    i: int

    def __post_init__(self):
        if self.x.bounds != self.x_prime.bounds or self.x.N != self.x_prime.N:
            raise errors.InvalidPair("both datasets must share N and bounds")
        if not 0 <= self.i < self.x.N:
            raise errors.InvalidPair(f"unit {self.i} out of range for N={self.x.N}")
        diff = [j for j, (a, b) in enumerate(zip(self.x.x, self.x_prime.x)) if a != b]
        if len(diff) > 1:
            raise errors.InvalidPair(f"datasets differ at units {diff}; Hamming distance > 1")
        if diff and diff[0] != self.i:
            raise errors.InvalidPair(f"datasets differ at unit {diff[0]}, not {self.i}")

    def reversed(self) -> "AdjacentPair":
        return AdjacentPair(self.x_prime, self.x, self.i)


def make_pair(x: Dataset, x_prime: Dataset, i: int | None = None) -> AdjacentPair:
    """Builds an adjacent pair, inferring the differing unit when ``i`` is None."""
    if i is None:
        diff = [j for j, (a, b) in enumerate(zip(x.x, x_prime.x)) if a != b]
        i = diff[0] if diff else 0
    return AdjacentPair(x, x_prime, int(i))


@dataclasses.dataclass(frozen=True, eq=False)
class AtomicDistribution:
    """Finite discrete law: strictly increasing ``values`` with positive ``masses``."""

    values: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        masses = np.asarray(self.masses, dtype=float)
        if values.ndim != 1 or values.shape != masses.shape or values.size == 0:
            raise ValueError("values and masses must be equal-length, non-empty 1-d arrays")
        if np.any(np.diff(values) <= 0):
            raise ValueError("atom values must be strictly increasing")
        if np.any(masses <= 0):
            raise ValueError("atom masses must be positive")
        values.setflags(write=False)
        masses.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "masses", masses)

    @classmethod
    def from_mapping(cls, atoms: Mapping[float, float]) -> "AtomicDistribution":
        items = sorted((float(v), float(m)) for v, m in atoms.items() if m > 0)
        return cls(np.array([v for v, _ in items]), np.array([m for _, m in items]))

    @classmethod
    def from_points(cls, values: Iterable[float], masses: Iterable[float]) -> "AtomicDistribution":
        """Sorts, drops zero masses and coalesces values closer than the merge tolerance."""
        values = np.asarray(list(values), dtype=float)
        masses = np.asarray(list(masses), dtype=float)
        keep = masses > 0
        values, masses = values[keep], masses[keep]
        order = np.argsort(values, kind="stable")
        values, masses = values[order], masses[order]
        out_v: list[float] = []
        out_m: list[float] = []
        for v, m in zip(values, masses):
            if out_v and v - out_v[-1] <= merge_tolerance(out_v[-1]):
                out_m[-1] += m
            else:
                out_v.append(float(v))
                out_m.append(float(m))
        return cls(np.array(out_v), np.array(out_m))

    def __len__(self) -> int:
        return self.values.size

    def as_dict(self) -> dict[float, float]:
        return dict(zip(self.values.tolist(), self.masses.tolist()))

    def mass_at(self, z: float) -> float:
        k = int(np.searchsorted(self.values, z))
        for j in (k - 1, k):
            if 0 <= j < self.values.size and abs(self.values[j] - z) <= merge_tolerance(z):
                return float(self.masses[j])
        return 0.0


def _first_order(pi) -> np.ndarray:
    if isinstance(pi, InclusionProbs):
        return pi.first
    return np.asarray(pi, dtype=float)


def ht_value(x, s: Iterable[int], pi) -> float:
    """Horvitz-Thompson total of sample ``s``: the sum of ``x_i / pi_i``.

    ``x`` may be a :class:`Dataset` or a plain sequence; ``pi`` an
    :class:`InclusionProbs` or a vector of first-order probabilities.
    """
    values = x.x if isinstance(x, Dataset) else x
    first = _first_order(pi)
    terms = []
    for i in sorted(s):
        if not first[i] > 0:
            raise errors.ZeroInclusionProbabilityInSample(
                f"unit {i} has inclusion probability {first[i]}")
        terms.append(values[i] / first[i])
    return math.fsum(terms)


def ht_weights(d: Design, x: Dataset) -> np.ndarray:
    """Per-unit contributions ``x_i / pi_i`` (0 for never-sampled units)."""
    if x.N != d.N:
        raise errors.InvalidDataset(f"dataset has {x.N} units but the design has N={d.N}")
    first = inclusion_probabilities(d, 1).first
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(first > 0, x.array() / np.where(first > 0, first, 1.0), 0.0)


def ht_values(d: Design, x: Dataset) -> np.ndarray:
    """HT value of every support sample, aligned with ``d.samples``."""
    return d.indicator @ ht_weights(d, x)


def atom_distribution(d: Design, x: Dataset) -> AtomicDistribution:
    """Exact law of the noiseless HT total under ``d`` given ``X = x``."""
    def compute():
        return AtomicDistribution.from_points(ht_values(d, x), d.probs)
    return d.cached(("atoms", x.x), compute)


def support_bounds(d: Design, datasets: Sequence[Dataset]) -> tuple[float, float]:
    if not datasets:
        raise ValueError("need at least one dataset")
    atoms = [atom_distribution(d, x) for x in datasets]
    return (min(float(a.values[0]) for a in atoms),
            max(float(a.values[-1]) for a in atoms))


_BOUND_KEYS = ("mx", "Mx", "mt", "Mt")


def _bounds_from(obj: Mapping[str, Any], defaults: Mapping[str, Any], x: Sequence[float], N: int):
    merged = {k: obj[k] if k in obj else defaults.get(k) for k in _BOUND_KEYS}
    if merged["mx"] is None:
        merged["mx"] = min(x)
    if merged["Mx"] is None:
        merged["Mx"] = max(x) if max(x) > merged["mx"] else merged["mx"] + 1.0
    if merged["mt"] is None:
        merged["mt"] = N * merged["mx"]
    if merged["Mt"] is None:
        merged["Mt"] = N * merged["Mx"]
    return merged


def dataset_from_json(obj: Mapping[str, Any], defaults: Mapping[str, Any] | None = None) -> Dataset:
    """Parses ``{"x": [...], "mx": .., "Mx": .., "mt": .., "Mt": ..}``.

    Missing bounds fall back to ``defaults`` and then to the loosest bounds
    compatible with ``x``: ``[min x, max x]`` and ``[N mx, N Mx]``.
    """
    try:
        x = [float(v) for v in obj["x"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise errors.SchemaViolation(f"dataset needs a numeric 'x' list: {exc!r}") from exc
    if not x:
        raise errors.SchemaViolation("dataset 'x' must be non-empty")
    return Dataset(tuple(x), **_bounds_from(obj, defaults or {}, x, len(x)))


def dataset_to_json(x: Dataset) -> dict:
    return {"x": list(x.x), "mx": x.mx, "Mx": x.Mx, "mt": x.mt, "Mt": x.Mt}


def pair_from_json(obj: Mapping[str, Any], defaults: Mapping[str, Any] | None = None) -> AdjacentPair:
    """Parses ``{"x": [...], "xp": [...], "i": 3}`` with optional bounds."""
    defaults = dict(defaults or {})
    try:
        x, xp = [float(v) for v in obj["x"]], [float(v) for v in obj["xp"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise errors.SchemaViolation(f"pair needs numeric 'x' and 'xp' lists: {exc!r}") from exc
    if len(x) != len(xp) or not x:
        raise errors.SchemaViolation("pair 'x' and 'xp' must be non-empty and of equal length")
    bounds = _bounds_from(obj, defaults, x + xp, len(x))
    return make_pair(Dataset(tuple(x), **bounds), Dataset(tuple(xp), **bounds), obj.get("i"))


def pairs_from_json(obj: Any) -> list[AdjacentPair]:
    """Accepts a single pair object, a list of them, or ``{"pairs": [...], bounds}``."""
    if isinstance(obj, list):
        return [pair_from_json(p) for p in obj]
    if isinstance(obj, Mapping) and "pairs" in obj:
        defaults = {k: obj[k] for k in _BOUND_KEYS if k in obj}
        return [pair_from_json(p, defaults) for p in obj["pairs"]]
    if isinstance(obj, Mapping):
        return [pair_from_json(obj)]
    raise errors.SchemaViolation("pairs file must be an object or a list of objects")


def pair_to_json(pair: AdjacentPair) -> dict:
    out = {"x": list(pair.x.x), "xp": list(pair.x_prime.x), "i": pair.i}
    out.update(zip(_BOUND_KEYS, pair.x.bounds))
    return out
