"""Longitudinal frequency estimation over several attributes.

L-SPL memoizes every attribute with split budgets ``(eps_perm/d, eps_1/d)``.
L-SMP draws one attribute per user *once*, memoizes it at full budgets and
reports only that attribute in every collection; resampling the attribute per
collection would reveal other attributes over time.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyGroupWarning, EmptyReportSet, InvalidConfig, ShapeMismatch
from .longitudinal import LONG_PROTOCOLS, LongProtocol, dbit_client, dbit_init, long_client, memoize_round1
from .multidim import _check_tuple, _check_tuples, _split
from .oracles import check_domain, check_eps
from .reports import SmpReport, SplReport

LONG_SOLUTIONS = ("spl", "smp")


@dataclass(frozen=True)
class LongMdimConfig:
    ks: tuple[int, ...]
    eps_perm: float
    eps_1: float | None
    solution: str = "smp"
    protocol: str = "L-GRR"
    d_bits: int | None = None
    d: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "ks", tuple(check_domain(k) for k in self.ks))
        object.__setattr__(self, "d", len(self.ks))
        object.__setattr__(self, "solution", self.solution.lower().removeprefix("l-"))
        object.__setattr__(self, "protocol", self.protocol.upper())
        check_eps(self.eps_perm)
        if self.d < 1:
            raise InvalidConfig("need at least one attribute")
        if self.solution not in LONG_SOLUTIONS:
            raise InvalidConfig(f"unknown solution {self.solution!r}; expected L-SPL or L-SMP")
        if self.protocol not in LONG_PROTOCOLS:
            raise InvalidConfig(f"unknown longitudinal protocol {self.protocol!r}")

    def protocols(self) -> list[LongProtocol]:
        """Per-attribute protocols at the budgets this solution assigns."""
        scale = self.d if self.solution == "spl" else 1
        eps_1 = None if self.eps_1 is None else self.eps_1 / scale
        return [LongProtocol(self.protocol, self.eps_perm / scale, eps_1, k, self.d_bits) for k in self.ks]


def _memo_one(proto: LongProtocol, v: int, rng):
    if proto.is_dbit:
        return dbit_init(v, proto.params, rng)
    return memoize_round1(v, proto.params, rng)


def _report_one(proto: LongProtocol, memo, rng):
    if proto.is_dbit:
        return dbit_client(memo)
    return long_client(memo, proto.params, rng)


@dataclass
class LongMdimUser:
    """Permanent per-user state: the sampled attribute (L-SMP) and memos keyed by (attr, value)."""

    cfg: LongMdimConfig
    attr: int | None = None
    memos: dict = field(default_factory=dict)

    def memo(self, j: int, v: int, proto: LongProtocol, rng):
        if (j, v) not in self.memos:
            self.memos[(j, v)] = _memo_one(proto, v, rng)
        return self.memos[(j, v)]

    def sampled_attr(self, rng) -> int:
        if self.attr is None:
            self.attr = int(rng.integers(self.cfg.d))
        return self.attr


def build_memos(t, cfg: LongMdimConfig, rng) -> list:
    """One permanent memo per attribute (L-SPL)."""
    t = _check_tuple(t, cfg.ks)
    return [_memo_one(p, x, rng) for p, x in zip(cfg.protocols(), t)]


def lspl_client(t, memos: list, cfg: LongMdimConfig, rng) -> SplReport:
    t = _check_tuple(t, cfg.ks)
    if len(memos) != cfg.d:
        raise ShapeMismatch(f"expected {cfg.d} memos, got {len(memos)}")
    return SplReport(tuple(_report_one(p, m, rng) for p, m in zip(cfg.protocols(), memos)))


def lspl_aggregate(reports, cfg: LongMdimConfig) -> list[np.ndarray]:
    if not reports:
        raise EmptyReportSet("no reports to aggregate")
    return [p.aggregate([r.reports[j] for r in reports]) for j, p in enumerate(cfg.protocols())]


def lsmp_client(t, user: LongMdimUser, cfg: LongMdimConfig, rng) -> SmpReport:
    t = _check_tuple(t, cfg.ks)
    j = user.sampled_attr(rng)
    proto = cfg.protocols()[j]
    return SmpReport(j, _report_one(proto, user.memo(j, t[j], proto, rng), rng))


def lsmp_aggregate(reports, cfg: LongMdimConfig) -> list[np.ndarray]:
    if not reports:
        raise EmptyReportSet("no reports to aggregate")
    out = []
    for j, p in enumerate(cfg.protocols()):
        group = [r.report for r in reports if r.attr == j]
        if group:
            out.append(p.aggregate(group))
        else:
            warnings.warn(f"no reports for attribute {j}; estimate set to 0", EmptyGroupWarning, stacklevel=2)
            out.append(np.zeros(cfg.ks[j]))
    return out


class LongMdimSolution:
    """Vectorized L-SPL / L-SMP pipeline; mirrors :class:`ldpfreq.multidim.MdimSolution`."""

    def __init__(self, cfg: LongMdimConfig):
        self.cfg = cfg
        self.protos = cfg.protocols()

    def memoize(self, tuples, rng):
        cfg = self.cfg
        tuples = _check_tuples(tuples, cfg.ks)
        if cfg.solution == "spl":
            return [p.memoize(tuples[:, j], rng) for j, p in enumerate(self.protos)]
        attrs = rng.integers(cfg.d, size=tuples.shape[0])
        return attrs, [p.memoize(tuples[attrs == j, j], rng) for j, p in enumerate(self.protos)]

    def report(self, state, rng):
        if self.cfg.solution == "spl":
            return [p.report(m, rng) for p, m in zip(self.protos, state)]
        attrs, memos = state
        return attrs, [p.report(m, rng) for p, m in zip(self.protos, memos)]

    def stats(self, batch) -> np.ndarray:
        if self.cfg.solution == "spl":
            parts = [p.stats(b).ravel() for p, b in zip(self.protos, batch)]
        else:
            attrs, groups = batch
            parts = [p.stats(b).ravel() for p, b in zip(self.protos, groups)]
            parts.append(np.bincount(attrs, minlength=self.cfg.d))
        return np.concatenate(parts).astype(np.int64)

    def _widths(self):
        # dBitFlipPM stats hold two rows (bit sums, sampler counts) per value
        return [2 * k if p.is_dbit else k for p, k in zip(self.protos, self.cfg.ks)]

    def estimate(self, stats, n: int) -> list[np.ndarray]:
        cfg = self.cfg
        stats = np.asarray(stats)
        widths = self._widths()
        if cfg.solution == "spl":
            parts = _split(stats, widths)
            return [p.estimate(c.reshape(-1, k) if p.is_dbit else c, n) for p, c, k in zip(self.protos, parts, cfg.ks)]
        sizes = stats[-cfg.d :]
        out = []
        for j, (p, c, k) in enumerate(zip(self.protos, _split(stats[: -cfg.d], widths), cfg.ks)):
            if sizes[j] == 0:
                warnings.warn(f"no reports for attribute {j}; estimate set to 0", EmptyGroupWarning, stacklevel=2)
                out.append(np.zeros(k))
            else:
                out.append(p.estimate(c.reshape(-1, k) if p.is_dbit else c, int(sizes[j])))
        return out

    def to_reports(self, batch) -> list:
        if self.cfg.solution == "spl":
            per_attr = [p.to_reports(b) for p, b in zip(self.protos, batch)]
            return [SplReport(tuple(r)) for r in zip(*per_attr)]
        attrs, groups = batch
        per_attr = [iter(p.to_reports(b)) for p, b in zip(self.protos, groups)]
        return [SmpReport(int(a), next(per_attr[a])) for a in attrs]
