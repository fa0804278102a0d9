"""Exact privacy audits from enumerated channel matrices.

A channel matrix holds ``P[output | input]`` for every input category (rows)
and every output the client can emit (columns), computed analytically from
the mechanism's probabilities. The realized budget is the largest log-ratio
between two rows over any column.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import InfeasibleBudget, OutputSpaceTooLarge, ShapeMismatch
from .hashing import lh_hash
from .longitudinal import (
    _UE_CHAINS,
    DBitParams,
    LongGrrParams,
    LongUeParams,
    make_dbit,
    solve_l_grr,
    solve_l_ue,
)
from .oracles import GrrParams, LhParams, SsParams, UeParams, grr_probs, make_grr, make_lh, make_ss, make_ue, ue_probs

MAX_INPUTS = 10
MAX_OUTPUTS = 1 << 10
STOCHASTIC_TOL = 1e-12
BUDGET_TOL = 1e-9


@dataclass(frozen=True)
class ChannelMatrix:
    probs: np.ndarray
    outputs: tuple | None = None

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 2:
            raise ShapeMismatch("channel matrix must be 2-D")
        if (probs < 0).any():
            raise ValueError("channel matrix has negative entries")
        if np.abs(probs.sum(axis=1) - 1).max() > STOCHASTIC_TOL:
            raise ValueError("channel matrix rows do not sum to 1")
        object.__setattr__(self, "probs", probs)

    @property
    def shape(self):
        return self.probs.shape


def _check_size(rows: int, cols: int):
    if rows > MAX_INPUTS or cols > MAX_OUTPUTS:
        raise OutputSpaceTooLarge(f"channel {rows}x{cols} exceeds {MAX_INPUTS}x{MAX_OUTPUTS}")


def bit_patterns(k: int) -> np.ndarray:
    """All 2**k bit vectors; row y has bit j = (y >> j) & 1."""
    return ((np.arange(1 << k)[:, None] >> np.arange(k)[None, :]) & 1).astype(bool)


def grr_matrix(k: int, p: float, q: float) -> np.ndarray:
    m = np.full((k, k), q)
    np.fill_diagonal(m, p)
    return m


def ue_matrix(k: int, p: float, q: float, inputs: np.ndarray | None = None) -> np.ndarray:
    """Per-bit randomization of the given 0/1 input rows (default: one-hot of each value)."""
    if inputs is None:
        inputs = np.eye(k, dtype=bool)
    one = np.where(inputs, p, q)  # P(bit j reported 1 | input row)
    pats = bit_patterns(k)
    # product over bits of P(y_j | x_j)
    return np.prod(np.where(pats[None, :, :], one[:, None, :], 1 - one[:, None, :]), axis=2)


def bitwise_matrix(k: int, p: float, q: float) -> np.ndarray:
    """Channel from every k-bit vector to every k-bit vector."""
    return ue_matrix(k, p, q, inputs=bit_patterns(k))


def enumerate_channel(mech, k: int | None = None, seed: int | None = None, buckets=None) -> ChannelMatrix:
    """Exact channel matrix of a client configuration.

    ``k`` is required for parameter sets that do not carry it. Local hashing
    is conditioned on ``seed``; dBitFlipPM on the bucket sample ``buckets``.
    Longitudinal parameters yield the end-to-end (two-round) channel.
    """
    if isinstance(mech, GrrParams):
        _check_size(mech.k, mech.k)
        return ChannelMatrix(grr_matrix(mech.k, mech.p, mech.q), tuple(range(mech.k)))
    if isinstance(mech, (LongGrrParams, LongUeParams)):
        first, second = long_rounds(mech, k)
        return compose(first, second)
    k = k if k is not None else getattr(mech, "k", None)
    if k is None:
        raise ShapeMismatch("domain size required")
    if isinstance(mech, UeParams):
        _check_size(k, 1 << k)
        return ChannelMatrix(ue_matrix(k, mech.p, mech.q), tuple(range(1 << k)))
    if isinstance(mech, LhParams):
        if seed is None:
            raise ValueError("local hashing is audited per fixed seed")
        _check_size(k, mech.g)
        hashed = lh_hash(np.uint64(seed), np.arange(k), mech.g)
        m = np.full((k, mech.g), mech.q)
        m[np.arange(k), hashed] = mech.p
        return ChannelMatrix(m, tuple(range(mech.g)))
    if isinstance(mech, SsParams):
        subsets = list(itertools.combinations(range(k), mech.omega))
        _check_size(k, len(subsets))
        with_v = mech.p / math.comb(k - 1, mech.omega - 1)
        without_v = (1 - mech.p) / math.comb(k - 1, mech.omega)
        m = np.array([[with_v if v in s else without_v for s in subsets] for v in range(k)])
        return ChannelMatrix(m, tuple(subsets))
    if isinstance(mech, DBitParams):
        if buckets is None:
            buckets = tuple(range(mech.d))
        buckets = np.asarray(buckets)
        if len(buckets) != mech.d:
            raise ShapeMismatch(f"bucket sample must have {mech.d} entries")
        _check_size(mech.k, 1 << mech.d)
        truth = buckets[None, :] == np.arange(mech.k)[:, None]
        one = np.where(truth, mech.p, 1 - mech.p)
        pats = bit_patterns(mech.d)
        m = np.prod(np.where(pats[None, :, :], one[:, None, :], 1 - one[:, None, :]), axis=2)
        return ChannelMatrix(m, tuple(range(1 << mech.d)))
    raise TypeError(f"cannot enumerate {type(mech).__name__}")


def long_rounds(params, k: int | None = None) -> tuple[ChannelMatrix, ChannelMatrix]:
    """Round-1 (permanent) and round-2 (instantaneous) channels of a chain."""
    if isinstance(params, LongGrrParams):
        _check_size(params.k, params.k)
        return (
            ChannelMatrix(grr_matrix(params.k, params.p1, params.q1)),
            ChannelMatrix(grr_matrix(params.k, params.p2, params.q2)),
        )
    k = k if k is not None else params.k
    if k is None:
        raise ShapeMismatch("domain size required")
    _check_size(k, 1 << k)
    return (
        ChannelMatrix(ue_matrix(k, params.p1, params.q1)),
        ChannelMatrix(bitwise_matrix(k, params.p2, params.q2)),
    )


def compose(first: ChannelMatrix, second: ChannelMatrix) -> ChannelMatrix:
    """Channel of applying ``second`` to the output of ``first``."""
    if first.shape[1] != second.shape[0]:
        raise ShapeMismatch(f"cannot compose {first.shape} with {second.shape}")
    return ChannelMatrix(first.probs @ second.probs, second.outputs)


def realized_epsilon(m) -> float:
    """Worst-case log-likelihood ratio; ``inf`` when some output rules out an input."""
    probs = m.probs if isinstance(m, ChannelMatrix) else np.asarray(m, dtype=float)
    probs = probs[:, probs.max(axis=0) > 0]
    lo = probs.min(axis=0)
    if (lo <= 0).any():
        return math.inf
    return float(np.log(probs.max(axis=0) / lo).max())


# ---------------------------------------------------------------------------
# Multidimensional views: rows are input tuples in itertools.product order


def _tuple_rows(mats: list[np.ndarray], ks) -> list[np.ndarray]:
    """Lift per-attribute matrices (k_j x out_j) to tuple inputs (prod k x out_j)."""
    grids = np.array(list(itertools.product(*[range(k) for k in ks])))
    return [m[grids[:, j]] for j, m in enumerate(mats)]


def _kron(mats):
    if len(mats) == 1:
        return mats[0]
    return reduce(np.kron, mats)


def _attribute_matrix(oracle, k, seed):
    return enumerate_channel(oracle.params, k=k, seed=seed).probs


def mdim_channel(cfg, seed: int = 0) -> ChannelMatrix:
    """Full channel of a multidimensional solution over all input tuples."""
    from .multidim import smp_oracles, spl_oracles

    ks = cfg.ks
    if cfg.solution == "spl":
        return ChannelMatrix(_kron([_attribute_matrix(o, k, seed) for o, k in zip(spl_oracles(cfg), ks)]))
    if cfg.solution == "smp":
        mats = [_attribute_matrix(o, k, seed) for o, k in zip(smp_oracles(cfg), ks)]
        return ChannelMatrix(np.hstack([b * (1 / cfg.d) for b in _tuple_rows(mats, ks)]))
    real, fake = [], []
    for k in ks:
        if cfg.oracle == "grr":
            p, q = grr_probs(cfg.eps_amp, k)
            real.append(grr_matrix(k, p, q))
            fake.append(np.full((k, k), 1.0 / k))
        else:
            p, q = ue_probs(cfg.eps_amp, cfg.oracle)
            real.append(ue_matrix(k, p, q))
            if cfg.fake_mode == "zero":
                row = ue_matrix(k, p, q, inputs=np.zeros((1, k), dtype=bool))[0]
            else:
                row = ue_matrix(k, p, q).mean(axis=0)
            fake.append(np.tile(row, (k, 1)))
    total = sum(
        _kron([real[i] if i == j else fake[i] for i in range(cfg.d)]) * (1 / cfg.d) for j in range(cfg.d)
    )
    return ChannelMatrix(total)


def neighbor_epsilon(m, ks, changed: int = 1) -> float:
    """Realized epsilon over tuple pairs differing in at most ``changed`` attributes.

    Rows of ``m`` are input tuples in ``itertools.product`` order, as built by
    :func:`mdim_channel`. With ``changed = len(ks)`` this is :func:`realized_epsilon`.
    """
    probs = m.probs if isinstance(m, ChannelMatrix) else np.asarray(m, dtype=float)
    grid = np.array(list(itertools.product(*[range(k) for k in ks])))
    dist = (grid[:, None, :] != grid[None, :, :]).sum(axis=2)
    worst = 0.0
    for a, b in zip(*np.nonzero((dist >= 1) & (dist <= changed))):
        live = probs[a] > 0
        if (probs[b][live] <= 0).any():
            return math.inf
        worst = max(worst, float(np.log(probs[a][live] / probs[b][live]).max()))
    return worst


def long_mdim_channel(cfg, buckets=None) -> ChannelMatrix:
    """End-to-end single-collection channel of an L-SPL / L-SMP solution."""
    mats = []
    for proto, k in zip(cfg.protocols(), cfg.ks):
        if proto.is_dbit:
            mats.append(enumerate_channel(proto.params, buckets=buckets).probs)
        else:
            mats.append(enumerate_channel(proto.params, k=k).probs)
    if cfg.solution == "spl":
        return ChannelMatrix(_kron(mats))
    return ChannelMatrix(np.hstack([b * (1 / cfg.d) for b in _tuple_rows(mats, cfg.ks)]))


# ---------------------------------------------------------------------------
# Audit verdicts


@dataclass(frozen=True)
class AuditResult:
    mechanism: str
    setting: str
    declared: float
    realized: float
    relation: str  # "eq", "le" or "infeasible"
    passed: bool

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        if self.relation == "infeasible":
            return f"{verdict} {self.mechanism:<11} {self.setting:<40} infeasible (max attainable {self.realized:.6f} < {self.declared:.6f})"
        sym = "==" if self.relation == "eq" else "<="
        return f"{verdict} {self.mechanism:<11} {self.setting:<40} realized {self.realized:.12f} {sym} {self.declared:.12f}"


def verdict(mechanism, setting, declared, realized, relation) -> AuditResult:
    if relation == "eq":
        ok = abs(realized - declared) <= BUDGET_TOL
    else:
        ok = realized <= declared + BUDGET_TOL
    return AuditResult(mechanism, setting, float(declared), float(realized), relation, bool(ok))


def max_attainable_ue_chain(eps_perm: float, variant: str, k: int) -> float:
    """Realized budget of a unary chain whose second round is at its noiseless end, by enumeration."""
    first, second = _UE_CHAINS[variant]
    p1, q1 = ue_probs(eps_perm, first)
    p2, q2 = (1.0, 0.0) if second == "SUE" else (0.5, 0.0)
    m1 = ChannelMatrix(ue_matrix(k, p1, q1))
    m2 = ChannelMatrix(bitwise_matrix(k, p2, q2))
    return realized_epsilon(compose(m1, m2))


def audit_protocol(name: str, k: int, eps: float | None = None, eps_perm: float | None = None,
                   eps_1: float | None = None, d_bits: int | None = None, seed: int = 0) -> list[AuditResult]:
    """Audit one protocol configuration; returns one verdict per checked channel."""
    name = name.upper()
    tag = f"k={k} " + (f"eps={eps:.4g}" if eps is not None else f"eps_perm={eps_perm:.4g}")
    if name == "GRR":
        return [verdict(name, tag, eps, realized_epsilon(enumerate_channel(make_grr(eps, k))), "eq")]
    if name in ("SUE", "OUE"):
        return [verdict(name, tag, eps, realized_epsilon(enumerate_channel(make_ue(eps, name, k))), "eq")]
    if name == "SS":
        return [verdict(name, tag, eps, realized_epsilon(enumerate_channel(make_ss(eps, k))), "le")]
    if name in ("BLH", "OLH"):
        params = make_lh(eps, name, k)
        return [
            verdict(name, f"{tag} seed={seed}", eps, realized_epsilon(enumerate_channel(params, seed=seed)), "le")
        ]
    if name == "DBITFLIPPM":
        params = make_dbit(eps_perm, k, d_bits or 1)
        rng = np.random.default_rng(seed)
        buckets = np.sort(rng.choice(k, size=params.d, replace=False))
        m = enumerate_channel(params, buckets=buckets)
        return [verdict(name, f"{tag} d={params.d} idx={buckets.tolist()}", eps_perm, realized_epsilon(m), "le")]
    if name == "L-GRR" or name in _UE_CHAINS:
        tag = f"{tag} eps_1={eps_1:.4g}"
        try:
            params = solve_l_grr(eps_perm, eps_1, k) if name == "L-GRR" else solve_l_ue(eps_perm, eps_1, name, k)
        except InfeasibleBudget:
            if name == "L-GRR":
                raise
            ceiling = max_attainable_ue_chain(eps_perm, name, k)
            return [AuditResult(name, tag, float(eps_1), ceiling, "infeasible", ceiling < eps_1)]
        first, second = long_rounds(params, k)
        return [
            verdict(name, tag + " [round 1]", eps_perm, realized_epsilon(first), "eq"),
            verdict(name, tag + " [end-to-end]", eps_1, realized_epsilon(compose(first, second)), "eq"),
        ]
    raise ValueError(f"unknown protocol {name!r}")


GRID_EPS = (0.5, 1.0, math.log(3), 2.0, 4.0)
GRID_K = (2, 3, 5, 6)
GRID_FRACTIONS = (0.25, 0.5, 0.75)
GRID_SEEDS = (0, 1, 2, 3)


def audit_grid(eps_values=GRID_EPS, ks=GRID_K, fractions=GRID_FRACTIONS, seeds=GRID_SEEDS) -> list[AuditResult]:
    """Audit every mechanism over a parameter grid."""
    results = []
    for eps in eps_values:
        for k in ks:
            for name in ("GRR", "SUE", "OUE", "SS"):
                results += audit_protocol(name, k, eps=eps)
            for name in ("BLH", "OLH"):
                for s in seeds:
                    results += audit_protocol(name, k, eps=eps, seed=s)
            for d_bits in sorted({1, max(1, k // 2), k}):
                for s in seeds[:2]:
                    results += audit_protocol("DBITFLIPPM", k, eps_perm=eps, d_bits=d_bits, seed=s)
            for name in ("L-GRR", *_UE_CHAINS):
                for frac in fractions:
                    results += audit_protocol(name, k, eps_perm=eps, eps_1=frac * eps)
    return results
