"""Single-attribute frequency oracles.

Every oracle comes in two flavours: a per-user client (``grr_client`` etc.)
that takes one category and returns a :mod:`ldpfreq.reports` object, and a
vectorized randomizer (``grr_randomize`` etc.) that sanitizes a whole array of
users at once and returns a compact numpy batch. Both consume an injected
``numpy.random.Generator``.

Server-side estimation is shared: count how many reports *support* each
value, then apply :func:`estimate_pure` with the oracle's ``(p_star, q_star)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    DegenerateChannel,
    DegenerateSubset,
    EmptyReportSet,
    InvalidBudget,
    InvalidDomain,
    MixedReportTypes,
    OutOfDomain,
)
from .hashing import lh_hash
from .reports import Bits, LhPair, Subset, Value

ORACLES = ("grr", "sue", "oue", "blh", "olh", "ss")

_LH_CHUNK = 1 << 16


def check_eps(eps: float) -> float:
    eps = float(eps)
    if not eps > 0 or math.isnan(eps):
        raise InvalidBudget(f"privacy budget must be > 0, got {eps}")
    return eps


def check_domain(k: int) -> int:
    if int(k) != k or k < 2:
        raise InvalidDomain(f"domain size must be an integer >= 2, got {k}")
    return int(k)


def check_value(v, k: int) -> int:
    if int(v) != v or not 0 <= v < k:
        raise OutOfDomain(f"value {v} outside domain [0, {k})")
    return int(v)


def check_values(values, k: int) -> np.ndarray:
    values = np.asarray(values)
    if values.size and (values.min() < 0 or values.max() >= k):
        raise OutOfDomain(f"values outside domain [0, {k})")
    return values.astype(np.int64, copy=False)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _exp(eps: float) -> float:
    # e^inf is allowed for noiseless limits; overflow maps to inf.
    try:
        return math.exp(eps)
    except OverflowError:
        return math.inf


# ---------------------------------------------------------------------------
# Parameter sets


@dataclass(frozen=True)
class GrrParams:
    k: int
    eps: float
    p: float
    q: float

    @property
    def p_star(self) -> float:
        return self.p

    @property
    def q_star(self) -> float:
        return self.q


@dataclass(frozen=True)
class UeParams:
    variant: str
    eps: float
    p: float
    q: float
    k: int | None = None

    @property
    def p_star(self) -> float:
        return self.p

    @property
    def q_star(self) -> float:
        return self.q


@dataclass(frozen=True)
class LhParams:
    variant: str
    eps: float
    g: int
    p: float
    k: int | None = None

    @property
    def q(self) -> float:
        """Probability of each specific non-hashed bucket."""
        return (1.0 - self.p) / (self.g - 1)

    @property
    def q_star(self) -> float:
        return 1.0 / self.g

    @property
    def p_star(self) -> float:
        return self.p


@dataclass(frozen=True)
class SsParams:
    k: int
    eps: float
    omega: int
    p: float
    q_star: float

    @property
    def p_star(self) -> float:
        return self.p


def grr_probs(eps: float, k: int) -> tuple[float, float]:
    """Keep probability and per-value switch probability of GRR."""
    e = _exp(eps)
    if math.isinf(e):
        return 1.0, 0.0
    p = e / (e + k - 1)
    return p, (1.0 - p) / (k - 1)


def ue_probs(eps: float, variant: str) -> tuple[float, float]:
    variant = variant.upper()
    if variant == "SUE":
        e = _exp(eps / 2)
        p = 1.0 if math.isinf(e) else e / (e + 1)
        return p, 1.0 - p
    if variant == "OUE":
        e = _exp(eps)
        return 0.5, 0.0 if math.isinf(e) else 1.0 / (e + 1)
    raise ValueError(f"unknown UE variant {variant!r}")


def make_grr(eps: float, k: int) -> GrrParams:
    eps, k = check_eps(eps), check_domain(k)
    p, q = grr_probs(eps, k)
    return GrrParams(k=k, eps=eps, p=p, q=q)


def make_ue(eps: float, variant: str = "OUE", k: int | None = None) -> UeParams:
    eps = check_eps(eps)
    if k is not None:
        k = check_domain(k)
    p, q = ue_probs(eps, variant)
    return UeParams(variant=variant.upper(), eps=eps, p=p, q=q, k=k)


def lh_range(eps: float, variant: str) -> int:
    variant = variant.upper()
    if variant == "BLH":
        return 2
    if variant == "OLH":
        return max(2, round_half_up(math.exp(eps)) + 1)
    raise ValueError(f"unknown LH variant {variant!r}")


def make_lh(eps: float, variant: str = "OLH", k: int | None = None) -> LhParams:
    eps = check_eps(eps)
    if k is not None:
        k = check_domain(k)
    g = lh_range(eps, variant)
    e = math.exp(eps)
    return LhParams(variant=variant.upper(), eps=eps, g=g, p=e / (e + g - 1), k=k)


def ss_subset_size(eps: float, k: int) -> int:
    return max(1, round_half_up(k / (math.exp(eps) + 1)))


def make_ss(eps: float, k: int) -> SsParams:
    eps, k = check_eps(eps), check_domain(k)
    omega = ss_subset_size(eps, k)
    if omega >= k:
        raise DegenerateSubset(f"subset size {omega} must be < k={k}")
    e = math.exp(eps)
    p = omega * e / (omega * e + k - omega)
    q_star = p * (omega - 1) / (k - 1) + (1 - p) * omega / (k - 1)
    return SsParams(k=k, eps=eps, omega=omega, p=p, q_star=q_star)


# ---------------------------------------------------------------------------
# Per-user clients


def grr_client(v: int, params: GrrParams, rng: np.random.Generator) -> Value:
    v = check_value(v, params.k)
    if rng.random() < params.p:
        return Value(v)
    u = int(rng.integers(params.k - 1))
    return Value(u + (u >= v))


def ue_client(v: int, k: int, params: UeParams, rng: np.random.Generator) -> Bits:
    v = check_value(v, k)
    probs = np.full(k, params.q)
    probs[v] = params.p
    bits = rng.random(k) < probs
    return Bits(tuple(int(b) for b in bits))


def lh_client(v: int, params: LhParams, rng: np.random.Generator) -> LhPair:
    if params.k is not None:
        v = check_value(v, params.k)
    seed = int(rng.integers(0, 2**64, dtype=np.uint64))
    h = int(lh_hash(seed, v, params.g))
    if rng.random() < params.p:
        return LhPair(seed, h)
    u = int(rng.integers(params.g - 1))
    return LhPair(seed, u + (u >= h))


def ss_client(v: int, params: SsParams, rng: np.random.Generator) -> Subset:
    v = check_value(v, params.k)
    others = np.array([u for u in range(params.k) if u != v])
    if rng.random() < params.p:
        picked = rng.choice(others, size=params.omega - 1, replace=False)
        chosen = [v, *picked.tolist()]
    else:
        chosen = rng.choice(others, size=params.omega, replace=False).tolist()
    return Subset(tuple(sorted(int(x) for x in chosen)))


# ---------------------------------------------------------------------------
# Vectorized randomizers


class LhBatch(NamedTuple):
    seeds: np.ndarray  # uint64
    buckets: np.ndarray  # int64


def grr_randomize(values, params: GrrParams, rng: np.random.Generator) -> np.ndarray:
    """Sanitize an array of categories with GRR; same shape out."""
    values = check_values(values, params.k)
    keep = rng.random(values.shape) < params.p
    other = rng.integers(0, params.k - 1, size=values.shape)
    other += other >= values
    return np.where(keep, values, other)


def ue_perturb(onehot: np.ndarray, p: float, q: float, rng: np.random.Generator) -> np.ndarray:
    """Report each 1-bit as 1 w.p. ``p`` and each 0-bit as 1 w.p. ``q``."""
    return rng.random(onehot.shape) < np.where(onehot, p, q)


def one_hot(values, k: int) -> np.ndarray:
    values = np.asarray(values)
    out = np.zeros((values.shape[0], k), dtype=bool)
    out[np.arange(values.shape[0]), values] = True
    return out


def ue_randomize(values, k: int, params: UeParams, rng: np.random.Generator) -> np.ndarray:
    values = check_values(values, k)
    return ue_perturb(one_hot(values, k), params.p, params.q, rng)


def lh_randomize(values, params: LhParams, rng: np.random.Generator) -> LhBatch:
    values = np.asarray(values, dtype=np.int64)
    if params.k is not None:
        values = check_values(values, params.k)
    n = values.shape[0]
    seeds = rng.integers(0, 2**64, size=n, dtype=np.uint64)
    hashed = lh_hash(seeds, values, params.g)
    keep = rng.random(n) < params.p
    other = rng.integers(0, params.g - 1, size=n)
    other += other >= hashed
    return LhBatch(seeds, np.where(keep, hashed, other))


def ss_randomize(values, params: SsParams, rng: np.random.Generator) -> np.ndarray:
    """Return an ``(n, omega)`` array of sorted subsets."""
    values = check_values(values, params.k)
    n = values.shape[0]
    keys = rng.random((n, params.k))
    keep = rng.random(n) < params.p
    # Forcing the true value's key below/above every other key puts it
    # first/last; the remaining choices are a uniform subset of the others.
    keys[np.arange(n), values] = np.where(keep, -1.0, 2.0)
    if params.omega == params.k - 1:
        chosen = np.argsort(keys, axis=1)[:, : params.omega]
    else:
        chosen = np.argpartition(keys, params.omega - 1, axis=1)[:, : params.omega]
    return np.sort(chosen, axis=1)


# ---------------------------------------------------------------------------
# Support counting and estimation


def count_values(values, k: int) -> np.ndarray:
    return np.bincount(np.asarray(values, dtype=np.int64).ravel(), minlength=k)[:k].astype(np.int64)


def count_bits(bits) -> np.ndarray:
    return np.asarray(bits).sum(axis=0, dtype=np.int64)


def count_lh(batch: LhBatch, k: int, g: int) -> np.ndarray:
    """Number of reports whose bucket matches the hash of each candidate value."""
    seeds, buckets = batch
    counts = np.zeros(k, dtype=np.int64)
    domain = np.arange(k, dtype=np.uint64)[None, :]
    for start in range(0, len(seeds), _LH_CHUNK):
        s = seeds[start : start + _LH_CHUNK, None]
        b = buckets[start : start + _LH_CHUNK, None]
        counts += (lh_hash(s, domain, g) == b).sum(axis=0)
    return counts


def count_subsets(subsets, k: int) -> np.ndarray:
    return count_values(np.asarray(subsets).ravel(), k)


def support_counts(reports: Sequence, params, k: int) -> np.ndarray:
    """Count, per value, the reports in ``reports`` that support it."""
    if len(reports) == 0:
        raise EmptyReportSet("no reports to count")
    kinds = {type(r) for r in reports}
    if len(kinds) != 1:
        raise MixedReportTypes(f"mixed report types: {sorted(t.__name__ for t in kinds)}")
    (kind,) = kinds
    if kind is Value:
        return count_values([r.v for r in reports], k)
    if kind is Bits:
        bits = np.array([r.b for r in reports], dtype=bool)
        if bits.shape[1] != k:
            raise MixedReportTypes(f"bit reports of length {bits.shape[1]} for k={k}")
        return count_bits(bits)
    if kind is LhPair:
        batch = LhBatch(
            np.array([r.seed for r in reports], dtype=np.uint64),
            np.array([r.bucket for r in reports], dtype=np.int64),
        )
        return count_lh(batch, k, params.g)
    if kind is Subset:
        return count_subsets([x for r in reports for x in r.s], k)
    raise MixedReportTypes(f"unsupported report type {kind.__name__}")


def estimate_pure(counts, n: int, p_star: float, q_star: float) -> np.ndarray:
    """Unbiased frequency estimate ``(counts/n - q*) / (p* - q*)``."""
    if n <= 0:
        raise EmptyReportSet("cannot estimate from zero reports")
    if p_star - q_star < 1e-12:
        raise DegenerateChannel(f"p*={p_star} and q*={q_star} are indistinguishable")
    return (np.asarray(counts, dtype=float) / n - q_star) / (p_star - q_star)


def clip_renormalize(est) -> np.ndarray:
    """Optional post-processing: clip to [0, 1] and rescale to sum to one."""
    est = np.clip(np.asarray(est, dtype=float), 0.0, 1.0)
    total = est.sum()
    if total <= 0:
        return np.full(est.shape, 1.0 / est.size)
    return est / total


# ---------------------------------------------------------------------------
# Uniform facade used by the multidimensional solutions and the harness


class Oracle:
    """One frequency oracle bound to a budget and a domain size."""

    def __init__(self, name: str, eps: float, k: int):
        name = name.lower()
        self.name = name
        self.k = check_domain(k)
        if name == "grr":
            self.params = make_grr(eps, k)
        elif name in ("sue", "oue"):
            self.params = make_ue(eps, name, k)
        elif name in ("blh", "olh"):
            self.params = make_lh(eps, name, k)
        elif name == "ss":
            self.params = make_ss(eps, k)
        else:
            raise ValueError(f"unknown oracle {name!r}; expected one of {ORACLES}")

    def __repr__(self):
        return f"Oracle({self.name!r}, eps={self.params.eps}, k={self.k})"

    @property
    def p_star(self) -> float:
        return self.params.p_star

    @property
    def q_star(self) -> float:
        return self.params.q_star

    def client(self, v: int, rng: np.random.Generator):
        if self.name == "grr":
            return grr_client(v, self.params, rng)
        if self.name in ("sue", "oue"):
            return ue_client(v, self.k, self.params, rng)
        if self.name in ("blh", "olh"):
            return lh_client(v, self.params, rng)
        return ss_client(v, self.params, rng)

    def randomize(self, values, rng: np.random.Generator):
        if self.name == "grr":
            return grr_randomize(values, self.params, rng)
        if self.name in ("sue", "oue"):
            return ue_randomize(values, self.k, self.params, rng)
        if self.name in ("blh", "olh"):
            return lh_randomize(values, self.params, rng)
        return ss_randomize(values, self.params, rng)

    def counts(self, batch) -> np.ndarray:
        if self.name == "grr":
            return count_values(batch, self.k)
        if self.name in ("sue", "oue"):
            return count_bits(batch)
        if self.name in ("blh", "olh"):
            return count_lh(batch, self.k, self.params.g)
        return count_subsets(batch, self.k)

    def estimate(self, counts, n: int) -> np.ndarray:
        return estimate_pure(counts, n, self.p_star, self.q_star)

    def aggregate(self, reports: Sequence) -> np.ndarray:
        """Estimate frequencies from a list of per-user report objects."""
        return self.estimate(support_counts(reports, self.params, self.k), len(reports))

    def to_reports(self, batch) -> list:
        """Expand a vectorized batch into per-user report objects."""
        if self.name == "grr":
            return [Value(int(v)) for v in batch]
        if self.name in ("sue", "oue"):
            return [Bits(tuple(int(b) for b in row)) for row in batch]
        if self.name in ("blh", "olh"):
            return [LhPair(int(s), int(b)) for s, b in zip(*batch)]
        return [Subset(tuple(int(x) for x in row)) for row in batch]
