"""Frequency estimation over ``d`` attributes in a single collection.

SPL
    every attribute is sanitized with budget ``eps / d``.
SMP
    each user samples one attribute and reports it (and its index) at ``eps``.
RS+FD
    each user samples one attribute and sanitizes it at the amplified budget
    :func:`amplify`, while every other attribute carries fake data, so the
    server cannot tell which position is real.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateChannel, EmptyGroupWarning, EmptyReportSet, InvalidConfig, OutOfDomain
from .oracles import (
    ORACLES,
    Oracle,
    check_domain,
    check_eps,
    count_bits,
    count_values,
    grr_probs,
    grr_randomize,
    GrrParams,
    one_hot,
    ue_perturb,
    ue_probs,
)
from .reports import Bits, RsfdReport, SmpReport, SplReport, Value

SOLUTIONS = ("spl", "smp", "rsfd")
RSFD_ORACLES = ("grr", "sue", "oue")
FAKE_MODES = ("zero", "rnd")


def amplify(eps: float, d: int) -> float:
    """Budget that the sampled attribute may use when hidden among ``d - 1`` fakes."""
    eps = check_eps(eps)
    if int(d) != d or d < 1:
        raise InvalidConfig(f"attribute count must be >= 1, got {d}")
    if d == 1:
        return eps
    return math.log1p(d * math.expm1(eps))


@dataclass(frozen=True)
class MdimConfig:
    ks: tuple[int, ...]
    eps: float
    solution: str = "smp"
    oracle: str = "grr"
    fake_mode: str = "zero"
    d: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "ks", tuple(check_domain(k) for k in self.ks))
        object.__setattr__(self, "d", len(self.ks))
        object.__setattr__(self, "solution", self.solution.lower())
        object.__setattr__(self, "oracle", self.oracle.lower())
        check_eps(self.eps)
        if self.d < 1:
            raise InvalidConfig("need at least one attribute")
        if self.solution not in SOLUTIONS:
            raise InvalidConfig(f"unknown solution {self.solution!r}; expected one of {SOLUTIONS}")
        allowed = RSFD_ORACLES if self.solution == "rsfd" else ORACLES
        if self.oracle not in allowed:
            raise InvalidConfig(f"{self.solution} does not support oracle {self.oracle!r}")
        if self.fake_mode not in FAKE_MODES:
            raise InvalidConfig(f"unknown fake mode {self.fake_mode!r}")

    @property
    def eps_amp(self) -> float:
        return amplify(self.eps, self.d)


def _check_tuple(t, ks) -> list[int]:
    t = [int(x) for x in t]
    if len(t) != len(ks):
        raise OutOfDomain(f"tuple of length {len(t)} for {len(ks)} attributes")
    for x, k in zip(t, ks):
        if not 0 <= x < k:
            raise OutOfDomain(f"value {x} outside domain [0, {k})")
    return t


def _check_tuples(tuples, ks) -> np.ndarray:
    tuples = np.asarray(tuples, dtype=np.int64)
    if tuples.ndim != 2 or tuples.shape[1] != len(ks):
        raise OutOfDomain(f"expected an (n, {len(ks)}) array of tuples")
    if tuples.size and ((tuples < 0).any() or (tuples >= np.asarray(ks)).any()):
        raise OutOfDomain("tuple entries outside their attribute domains")
    return tuples


def _split(stats, ks):
    return np.split(np.asarray(stats), np.cumsum(ks)[:-1])


# ---------------------------------------------------------------------------
# SPL


def spl_oracles(cfg: MdimConfig) -> list[Oracle]:
    return [Oracle(cfg.oracle, cfg.eps / cfg.d, k) for k in cfg.ks]


def spl_client(t, cfg: MdimConfig, rng: np.random.Generator) -> SplReport:
    t = _check_tuple(t, cfg.ks)
    return SplReport(tuple(o.client(x, rng) for o, x in zip(spl_oracles(cfg), t)))


def spl_aggregate(reports, cfg: MdimConfig) -> list[np.ndarray]:
    if not reports:
        raise EmptyReportSet("no reports to aggregate")
    return [o.aggregate([r.reports[j] for r in reports]) for j, o in enumerate(spl_oracles(cfg))]


# ---------------------------------------------------------------------------
# SMP


def smp_oracles(cfg: MdimConfig) -> list[Oracle]:
    return [Oracle(cfg.oracle, cfg.eps, k) for k in cfg.ks]


def smp_client(t, cfg: MdimConfig, rng: np.random.Generator) -> SmpReport:
    t = _check_tuple(t, cfg.ks)
    attr = int(rng.integers(cfg.d))
    return SmpReport(attr, smp_oracles(cfg)[attr].client(t[attr], rng))


def _empty_group(j):
    warnings.warn(f"no reports for attribute {j}; estimate set to 0", EmptyGroupWarning, stacklevel=3)


def smp_aggregate(reports, cfg: MdimConfig) -> list[np.ndarray]:
    if not reports:
        raise EmptyReportSet("no reports to aggregate")
    out = []
    for j, o in enumerate(smp_oracles(cfg)):
        group = [r.report for r in reports if r.attr == j]
        if group:
            out.append(o.aggregate(group))
        else:
            _empty_group(j)
            out.append(np.zeros(cfg.ks[j]))
    return out


# ---------------------------------------------------------------------------
# RS+FD


def rsfd_grr_estimate(counts, n: int, k: int, d: int, p: float, q: float) -> np.ndarray:
    if n <= 0:
        raise EmptyReportSet("cannot estimate from zero reports")
    if p - q < 1e-12:
        raise DegenerateChannel("RS+FD[GRR] channel is degenerate")
    return (np.asarray(counts, dtype=float) / n - q / d - (d - 1) / (d * k)) * d / (p - q)


def rsfd_ue_estimate(counts, n: int, k: int, d: int, p: float, q: float, fake_mode: str) -> np.ndarray:
    if n <= 0:
        raise EmptyReportSet("cannot estimate from zero reports")
    if p - q < 1e-12:
        raise DegenerateChannel("RS+FD[UE] channel is degenerate")
    est = d * (np.asarray(counts, dtype=float) / n - q) / (p - q)
    if fake_mode == "rnd":
        est -= (d - 1) / k
    return est


def rsfd_grr_client(t, cfg: MdimConfig, rng: np.random.Generator) -> RsfdReport:
    t = _check_tuple(t, cfg.ks)
    attr = int(rng.integers(cfg.d))
    out = []
    for j, (x, k) in enumerate(zip(t, cfg.ks)):
        if j == attr:
            p, q = grr_probs(cfg.eps_amp, k)
            if rng.random() < p:
                out.append(Value(x))
            else:
                u = int(rng.integers(k - 1))
                out.append(Value(u + (u >= x)))
        else:
            out.append(Value(int(rng.integers(k))))
    return RsfdReport(tuple(out))


def rsfd_grr_aggregate(reports, cfg: MdimConfig) -> list[np.ndarray]:
    if not reports:
        raise EmptyReportSet("no reports to aggregate")
    n = len(reports)
    out = []
    for j, k in enumerate(cfg.ks):
        p, q = grr_probs(cfg.eps_amp, k)
        counts = count_values([r.reports[j].v for r in reports], k)
        out.append(rsfd_grr_estimate(counts, n, k, cfg.d, p, q))
    return out


def _fake_onehot(k: int, fake_mode: str, rng: np.random.Generator) -> np.ndarray:
    v = np.zeros(k, dtype=bool)
    if fake_mode == "rnd":
        v[rng.integers(k)] = True
    return v


def rsfd_ue_client(t, cfg: MdimConfig, rng: np.random.Generator, fake_mode: str | None = None) -> RsfdReport:
    fake_mode = fake_mode or cfg.fake_mode
    t = _check_tuple(t, cfg.ks)
    p, q = ue_probs(cfg.eps_amp, cfg.oracle)
    attr = int(rng.integers(cfg.d))
    out = []
    for j, (x, k) in enumerate(zip(t, cfg.ks)):
        if j == attr:
            enc = one_hot([x], k)[0]
        else:
            enc = _fake_onehot(k, fake_mode, rng)
        out.append(Bits(tuple(int(b) for b in ue_perturb(enc, p, q, rng))))
    return RsfdReport(tuple(out))


def rsfd_ue_aggregate(reports, cfg: MdimConfig, fake_mode: str | None = None) -> list[np.ndarray]:
    fake_mode = fake_mode or cfg.fake_mode
    if not reports:
        raise EmptyReportSet("no reports to aggregate")
    n = len(reports)
    p, q = ue_probs(cfg.eps_amp, cfg.oracle)
    out = []
    for j, k in enumerate(cfg.ks):
        counts = count_bits(np.array([r.reports[j].b for r in reports], dtype=bool))
        out.append(rsfd_ue_estimate(counts, n, k, cfg.d, p, q, fake_mode))
    return out


# ---------------------------------------------------------------------------
# Vectorized facade


class MdimSolution:
    """Vectorized pipeline for one :class:`MdimConfig`.

    ``stats`` flattens the per-attribute support counts (followed by the group
    sizes for SMP) into a single additive int64 array.
    """

    def __init__(self, cfg: MdimConfig):
        self.cfg = cfg
        if cfg.solution == "spl":
            self.oracles = spl_oracles(cfg)
        elif cfg.solution == "smp":
            self.oracles = smp_oracles(cfg)
        else:
            self.oracles = None

    def client(self, t, rng):
        cfg = self.cfg
        if cfg.solution == "spl":
            return spl_client(t, cfg, rng)
        if cfg.solution == "smp":
            return smp_client(t, cfg, rng)
        if cfg.oracle == "grr":
            return rsfd_grr_client(t, cfg, rng)
        return rsfd_ue_client(t, cfg, rng)

    def aggregate(self, reports) -> list[np.ndarray]:
        cfg = self.cfg
        if cfg.solution == "spl":
            return spl_aggregate(reports, cfg)
        if cfg.solution == "smp":
            return smp_aggregate(reports, cfg)
        if cfg.oracle == "grr":
            return rsfd_grr_aggregate(reports, cfg)
        return rsfd_ue_aggregate(reports, cfg)

    def randomize(self, tuples, rng: np.random.Generator):
        cfg = self.cfg
        tuples = _check_tuples(tuples, cfg.ks)
        n = tuples.shape[0]
        if cfg.solution == "spl":
            return [o.randomize(tuples[:, j], rng) for j, o in enumerate(self.oracles)]
        attrs = rng.integers(cfg.d, size=n)
        if cfg.solution == "smp":
            return attrs, [o.randomize(tuples[attrs == j, j], rng) for j, o in enumerate(self.oracles)]
        out = []
        for j, k in enumerate(cfg.ks):
            sampled = attrs == j
            if cfg.oracle == "grr":
                p, q = grr_probs(cfg.eps_amp, k)
                col = rng.integers(k, size=n)
                col[sampled] = grr_randomize(tuples[sampled, j], GrrParams(k, cfg.eps_amp, p, q), rng)
                out.append(col)
            else:
                p, q = ue_probs(cfg.eps_amp, cfg.oracle)
                if cfg.fake_mode == "rnd":
                    enc = one_hot(rng.integers(k, size=n), k)
                else:
                    enc = np.zeros((n, k), dtype=bool)
                enc[sampled] = one_hot(tuples[sampled, j], k)
                out.append(ue_perturb(enc, p, q, rng))
        return out

    def stats(self, batch) -> np.ndarray:
        cfg = self.cfg
        if cfg.solution == "spl":
            parts = [o.counts(b) for o, b in zip(self.oracles, batch)]
        elif cfg.solution == "smp":
            attrs, groups = batch
            parts = [o.counts(b) for o, b in zip(self.oracles, groups)]
            parts.append(np.bincount(attrs, minlength=cfg.d))
        elif cfg.oracle == "grr":
            parts = [count_values(col, k) for col, k in zip(batch, cfg.ks)]
        else:
            parts = [count_bits(b) for b in batch]
        return np.concatenate(parts).astype(np.int64)

    def estimate(self, stats, n: int) -> list[np.ndarray]:
        cfg = self.cfg
        stats = np.asarray(stats)
        if cfg.solution == "spl":
            return [o.estimate(c, n) for o, c in zip(self.oracles, _split(stats, cfg.ks))]
        if cfg.solution == "smp":
            sizes = stats[-cfg.d :]
            out = []
            for j, (o, c) in enumerate(zip(self.oracles, _split(stats[: -cfg.d], cfg.ks))):
                if sizes[j] == 0:
                    _empty_group(j)
                    out.append(np.zeros(cfg.ks[j]))
                else:
                    out.append(o.estimate(c, int(sizes[j])))
            return out
        out = []
        for c, k in zip(_split(stats, cfg.ks), cfg.ks):
            if cfg.oracle == "grr":
                p, q = grr_probs(cfg.eps_amp, k)
                out.append(rsfd_grr_estimate(c, n, k, cfg.d, p, q))
            else:
                p, q = ue_probs(cfg.eps_amp, cfg.oracle)
                out.append(rsfd_ue_estimate(c, n, k, cfg.d, p, q, cfg.fake_mode))
        return out

    def to_reports(self, batch) -> list:
        cfg = self.cfg
        if cfg.solution == "spl":
            per_attr = [o.to_reports(b) for o, b in zip(self.oracles, batch)]
            return [SplReport(tuple(r)) for r in zip(*per_attr)]
        if cfg.solution == "smp":
            attrs, groups = batch
            per_attr = [iter(o.to_reports(b)) for o, b in zip(self.oracles, groups)]
            return [SmpReport(int(a), next(per_attr[a])) for a in attrs]
        if cfg.oracle == "grr":
            return [RsfdReport(tuple(Value(int(x)) for x in row)) for row in np.stack(batch, axis=1)]
        return [
            RsfdReport(tuple(Bits(tuple(int(x) for x in b[i])) for b in batch)) for i in range(len(batch[0]))
        ]
