"""Longitudinal protocols built on memoization.

A user sanitizes their value once with a permanent budget ``eps_perm`` and
caches the result (the memo). Every later collection re-sanitizes the memo
with fresh noise so that a single report satisfies ``eps_1`` while the total
leakage over infinitely many reports stays bounded by ``eps_perm``.

Chains offered: L-GRR and four unary-encoding chains (L-SUE, L-SOUE, L-OUE,
L-OSUE, named after the first and second round encodings). dBitFlipPM
memoizes ``d`` sampled bits for the user's lifetime and replays them.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyGroupWarning,
    EmptyReportSet,
    InfeasibleBudget,
    InvalidBudget,
    InvalidSampleSize,
    MixedReportTypes,
    ShapeMismatch,
)
from .oracles import (
    GrrParams,
    check_domain,
    check_eps,
    check_value,
    check_values,
    count_bits,
    count_values,
    estimate_pure,
    grr_client,
    grr_randomize,
    one_hot,
    support_counts,
    ue_perturb,
    ue_probs,
)
from .reports import Bits, DBitReport, Value

L_UE_VARIANTS = ("L-SUE", "L-SOUE", "L-OUE", "L-OSUE")
LONG_PROTOCOLS = ("L-GRR", *L_UE_VARIANTS, "DBITFLIPPM")

# round-1 and round-2 encodings of each unary chain
_UE_CHAINS = {
    "L-SUE": ("SUE", "SUE"),
    "L-SOUE": ("SUE", "OUE"),
    "L-OUE": ("OUE", "OUE"),
    "L-OSUE": ("OUE", "SUE"),
}

BISECT_TOL = 1e-12
BISECT_MAX_ITER = 200


@dataclass(frozen=True)
class LongBudget:
    eps_perm: float
    eps_1: float

    def __post_init__(self):
        check_eps(self.eps_perm)
        check_eps(self.eps_1)
        if not self.eps_1 < self.eps_perm:
            raise InvalidBudget(
                f"eps_1 ({self.eps_1}) must be strictly below eps_perm ({self.eps_perm})"
            )


@dataclass(frozen=True)
class LongGrrParams:
    k: int
    budget: LongBudget
    p1: float
    q1: float
    p2: float
    q2: float
    p_star: float
    q_star: float

    @property
    def round1(self) -> GrrParams:
        return GrrParams(self.k, self.budget.eps_perm, self.p1, self.q1)

    @property
    def round2(self) -> GrrParams:
        return GrrParams(self.k, math.log(self.p2 / self.q2) if self.q2 > 0 else math.inf, self.p2, self.q2)


@dataclass(frozen=True)
class LongUeParams:
    variant: str
    budget: LongBudget
    p1: float
    q1: float
    p2: float
    q2: float
    p_star: float
    q_star: float
    k: int | None = None


def _grr_chain(p1, q1, p2, k):
    q2 = (1 - p2) / (k - 1)
    p_star = p1 * p2 + (1 - p1) * q2
    q_star = q1 * p2 + p1 * q2 + (k - 2) * q1 * q2
    return q2, p_star, q_star


def l_grr_round2(eps_perm: float, eps_1: float, k: int) -> float:
    """Round-2 keep probability making the chained GRR channel ``eps_1``-LDP."""
    p1 = math.exp(eps_perm) / (math.exp(eps_perm) + k - 1)
    q1 = (1 - p1) / (k - 1)
    e1 = math.exp(eps_1)
    return (e1 * (p1 + (k - 2) * q1) - (k - 1) * q1) / ((p1 - q1) * (k - 1 + e1))


def solve_l_grr(eps_perm: float, eps_1: float, k: int) -> LongGrrParams:
    budget = LongBudget(float(eps_perm), float(eps_1))
    k = check_domain(k)
    e = math.exp(budget.eps_perm)
    p1 = e / (e + k - 1)
    q1 = (1 - p1) / (k - 1)
    p2 = l_grr_round2(budget.eps_perm, budget.eps_1, k)
    if not 0 < p2 <= 1:
        raise InfeasibleBudget(f"solved round-2 probability {p2} outside (0, 1]")
    q2, p_star, q_star = _grr_chain(p1, q1, p2, k)
    if not p_star > q_star:
        raise InfeasibleBudget("chained channel does not favour the true value")
    if abs(math.log(p_star / q_star) - budget.eps_1) > 1e-9:
        raise InfeasibleBudget("chained GRR channel misses eps_1")
    return LongGrrParams(k, budget, p1, q1, p2, q2, p_star, q_star)


def ue_epsilon(p: float, q: float) -> float:
    """Privacy level of per-bit randomization with P(1|1)=p, P(1|0)=q."""
    return math.log(p * (1 - q) / (q * (1 - p)))


def _ue_chain(p1, q1, p2, q2):
    return p1 * p2 + (1 - p1) * q2, q1 * p2 + (1 - q1) * q2


def _round2_pair(family: str, x: float) -> tuple[float, float]:
    # free parameter: p2 for symmetric (q2 = 1 - p2), q2 for optimized (p2 = 1/2)
    return (x, 1 - x) if family == "SUE" else (0.5, x)


def _bisect(f, lo, hi):
    flo = f(lo)
    for _ in range(BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        if (fmid < 0) == (flo < 0):
            lo, flo = mid, fmid
        else:
            hi = mid
        if abs(hi - lo) < BISECT_TOL:
            break
    return 0.5 * (lo + hi)


def solve_l_ue(eps_perm: float, eps_1: float, variant: str, k: int | None = None) -> LongUeParams:
    """Solve the round-2 parameter of a unary-encoding chain by bisection."""
    budget = LongBudget(float(eps_perm), float(eps_1))
    variant = variant.upper()
    if variant not in _UE_CHAINS:
        raise ValueError(f"unknown L-UE variant {variant!r}; expected one of {L_UE_VARIANTS}")
    if k is not None:
        k = check_domain(k)
    first, second = _UE_CHAINS[variant]
    p1, q1 = ue_probs(budget.eps_perm, first)

    def composed_eps(x):
        p_star, q_star = _ue_chain(p1, q1, *_round2_pair(second, x))
        return ue_epsilon(p_star, q_star)

    # objective is 0 at x=1/2 and monotone toward the noiseless end
    noiseless = 1.0 if second == "SUE" else 0.0
    eps_max = composed_eps(noiseless)
    if budget.eps_1 > eps_max:
        raise InfeasibleBudget(
            f"{variant} cannot reach eps_1={budget.eps_1} at eps_perm={budget.eps_perm} "
            f"(largest attainable {eps_max:.6g})"
        )
    x = _bisect(lambda x: composed_eps(x) - budget.eps_1, 0.5, noiseless)
    p2, q2 = _round2_pair(second, x)
    p_star, q_star = _ue_chain(p1, q1, p2, q2)
    if abs(ue_epsilon(p_star, q_star) - budget.eps_1) > 1e-9:
        raise InfeasibleBudget(f"bisection for {variant} did not converge")
    return LongUeParams(variant, budget, p1, q1, p2, q2, p_star, q_star, k)


# ---------------------------------------------------------------------------
# Memoization and reporting


@dataclass(frozen=True)
class UserMemo:
    value: int
    report: Value | Bits


def _params_k(params) -> int:
    if params.k is None:
        raise ShapeMismatch("parameters carry no domain size")
    return params.k


def memoize_round1(v: int, params, rng: np.random.Generator) -> UserMemo:
    """Apply the permanent (round-1) randomization once."""
    k = _params_k(params)
    v = check_value(v, k)
    if isinstance(params, LongGrrParams):
        return UserMemo(v, grr_client(v, params.round1, rng))
    bits = ue_perturb(one_hot([v], k)[0], params.p1, params.q1, rng)
    return UserMemo(v, Bits(tuple(int(b) for b in bits)))


def long_client(memo: UserMemo, params, rng: np.random.Generator):
    """Round-2 report drawn freshly from the memoized round-1 report."""
    k = _params_k(params)
    if isinstance(params, LongGrrParams):
        if not isinstance(memo.report, Value):
            raise ShapeMismatch("L-GRR expects a memoized category")
        u = memo.report.v
        if rng.random() < params.p2:
            return Value(u)
        w = int(rng.integers(k - 1))
        return Value(w + (w >= u))
    if not isinstance(memo.report, Bits) or len(memo.report.b) != k:
        raise ShapeMismatch(f"{params.variant} expects a memoized bit vector of length {k}")
    bits = ue_perturb(np.array(memo.report.b, dtype=bool), params.p2, params.q2, rng)
    return Bits(tuple(int(b) for b in bits))


@dataclass
class MemoStore:
    """One simulated user's memos, keyed by true value."""

    params: object
    memos: dict = field(default_factory=dict)

    def memo(self, v: int, rng: np.random.Generator) -> UserMemo:
        if v not in self.memos:
            self.memos[v] = memoize_round1(v, self.params, rng)
        return self.memos[v]

    def report(self, v: int, rng: np.random.Generator):
        return long_client(self.memo(v, rng), self.params, rng)


def long_aggregate(reports, params) -> np.ndarray:
    k = _params_k(params)
    if len(reports) == 0:
        raise EmptyReportSet("no reports to aggregate")
    counts = support_counts(reports, params, k)
    return estimate_pure(counts, len(reports), params.p_star, params.q_star)


def round1_randomize(values, params, rng: np.random.Generator) -> np.ndarray:
    k = _params_k(params)
    if isinstance(params, LongGrrParams):
        return grr_randomize(values, params.round1, rng)
    return ue_perturb(one_hot(check_values(values, k), k), params.p1, params.q1, rng)


def round2_randomize(memos: np.ndarray, params, rng: np.random.Generator) -> np.ndarray:
    if isinstance(params, LongGrrParams):
        return grr_randomize(memos, params.round2, rng)
    return ue_perturb(memos, params.p2, params.q2, rng)


# ---------------------------------------------------------------------------
# dBitFlipPM


@dataclass(frozen=True)
class DBitParams:
    k: int
    d: int
    eps_perm: float
    p: float


@dataclass(frozen=True)
class DBitMemo:
    buckets: tuple[int, ...]
    bits: tuple[int, ...]


def make_dbit(eps_perm: float, k: int, d: int) -> DBitParams:
    eps_perm, k = check_eps(eps_perm), check_domain(k)
    if int(d) != d or not 1 <= d <= k:
        raise InvalidSampleSize(f"number of sampled buckets must be in [1, {k}], got {d}")
    e = math.exp(eps_perm / 2)
    return DBitParams(k, int(d), eps_perm, e / (e + 1))


def dbit_init(v: int, params: DBitParams, rng: np.random.Generator) -> DBitMemo:
    v = check_value(v, params.k)
    buckets = np.sort(rng.choice(params.k, size=params.d, replace=False))
    truth = buckets == v
    bits = rng.random(params.d) < np.where(truth, params.p, 1 - params.p)
    return DBitMemo(tuple(int(b) for b in buckets), tuple(int(b) for b in bits))


def dbit_client(memo: DBitMemo) -> DBitReport:
    return DBitReport(memo.buckets, memo.bits)


def dbit_init_batch(values, params: DBitParams, rng: np.random.Generator):
    """Vectorized :func:`dbit_init`; returns ``(buckets, bits)`` arrays of shape (n, d)."""
    values = check_values(values, params.k)
    n = values.shape[0]
    if params.d == params.k:
        # every bucket sampled; no draw needed, so randomness use matches SUE
        buckets = np.broadcast_to(np.arange(params.k), (n, params.k)).copy()
    else:
        keys = rng.random((n, params.k))
        buckets = np.sort(np.argpartition(keys, params.d - 1, axis=1)[:, : params.d], axis=1)
    truth = buckets == values[:, None]
    bits = rng.random((n, params.d)) < np.where(truth, params.p, 1 - params.p)
    return buckets, bits


def dbit_stats(buckets, bits, k: int) -> np.ndarray:
    """Stack of per-value (sum of reported bits, number of samplers)."""
    buckets = np.asarray(buckets)
    bits = np.asarray(bits)
    sums = np.bincount(buckets[bits.astype(bool)].ravel(), minlength=k)[:k]
    samplers = np.bincount(buckets.ravel(), minlength=k)[:k]
    return np.stack([sums, samplers]).astype(np.int64)


def dbit_estimate(stats, params: DBitParams) -> np.ndarray:
    sums, samplers = np.asarray(stats, dtype=float)
    e = math.exp(params.eps_perm / 2)
    est = np.zeros(params.k)
    seen = samplers > 0
    if not seen.all():
        missing = np.flatnonzero(~seen).tolist()
        warnings.warn(f"no user sampled values {missing}; estimates set to 0", EmptyGroupWarning, stacklevel=2)
    est[seen] = (sums[seen] / samplers[seen] * (e + 1) - 1) / (e - 1)
    return est


def dbit_aggregate(reports, params: DBitParams) -> np.ndarray:
    if len(reports) == 0:
        raise EmptyReportSet("no reports to aggregate")
    if any(not isinstance(r, DBitReport) for r in reports):
        raise MixedReportTypes("dBitFlipPM aggregation expects dbit reports only")
    buckets = np.array([r.idx for r in reports], dtype=np.int64)
    bits = np.array([r.bits for r in reports], dtype=bool)
    if buckets.shape != (len(reports), params.d) or bits.shape != buckets.shape:
        raise ShapeMismatch(f"dbit reports must carry exactly d={params.d} buckets and bits")
    return dbit_estimate(dbit_stats(buckets, bits, params.k), params)


# ---------------------------------------------------------------------------
# Uniform facade


class LongProtocol:
    """A longitudinal protocol bound to budgets and a domain size.

    ``memoize`` builds per-user permanent state for a batch of users,
    ``report`` produces one collection from that state, ``stats`` reduces a
    collection to an additive integer array and ``estimate`` finishes it.
    """

    def __init__(self, name: str, eps_perm: float, eps_1: float | None, k: int, d_bits: int | None = None):
        name = name.upper()
        if name == "DBITFLIPPM":
            self.params = make_dbit(eps_perm, k, d_bits if d_bits is not None else 1)
        elif name == "L-GRR":
            self.params = solve_l_grr(eps_perm, eps_1, k)
        elif name in _UE_CHAINS:
            self.params = solve_l_ue(eps_perm, eps_1, name, k)
        else:
            raise ValueError(f"unknown longitudinal protocol {name!r}; expected one of {LONG_PROTOCOLS}")
        self.name = name
        self.k = check_domain(k)

    def __repr__(self):
        return f"LongProtocol({self.name!r}, k={self.k})"

    @property
    def is_dbit(self) -> bool:
        return self.name == "DBITFLIPPM"

    def memoize(self, values, rng: np.random.Generator):
        if self.is_dbit:
            return dbit_init_batch(values, self.params, rng)
        return round1_randomize(values, self.params, rng)

    def report(self, memos, rng: np.random.Generator):
        if self.is_dbit:
            return memos
        return round2_randomize(memos, self.params, rng)

    def stats(self, batch) -> np.ndarray:
        if self.is_dbit:
            return dbit_stats(*batch, self.k)
        if self.name == "L-GRR":
            return count_values(batch, self.k)
        return count_bits(batch)

    def estimate(self, stats, n: int) -> np.ndarray:
        if self.is_dbit:
            return dbit_estimate(stats, self.params)
        return estimate_pure(stats, n, self.params.p_star, self.params.q_star)

    def to_reports(self, batch) -> list:
        if self.is_dbit:
            buckets, bits = batch
            return [
                DBitReport(tuple(int(x) for x in b), tuple(int(x) for x in s)) for b, s in zip(buckets, bits)
            ]
        if self.name == "L-GRR":
            return [Value(int(v)) for v in batch]
        return [Bits(tuple(int(b) for b in row)) for row in batch]

    def aggregate(self, reports) -> np.ndarray:
        if self.is_dbit:
            return dbit_aggregate(reports, self.params)
        return long_aggregate(reports, self.params)
