"""End-to-end simulation: synthetic users, client randomization, aggregation, metrics.

Randomness is organized in fixed-size user shards. Every shard draws from its
own generator, seeded from ``(seed, purpose, trial, collection, shard)``
through :class:`numpy.random.SeedSequence`, so results do not depend on how
many worker threads process the shards or in which order.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import IO

import numpy as np

from .errors import InvalidConfig, InvalidDistributionParam, LDPError
from .long_multidim import LONG_SOLUTIONS, LongMdimConfig, LongMdimSolution
from .longitudinal import LONG_PROTOCOLS, LongProtocol
from .multidim import FAKE_MODES, SOLUTIONS, MdimConfig, MdimSolution
from .oracles import ORACLES, Oracle, clip_renormalize
from .reports import write_reports

TASKS = ("single", "long", "mdim", "long-mdim")
SHARD_SIZE = 1 << 16

# stream purposes
_DATA, _MEMO, _REPORT = 0, 1, 2


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for one (purpose, trial, collection, shard) cell."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


# ---------------------------------------------------------------------------
# Datasets


def parse_distribution(dist: str) -> tuple[str, object]:
    """``uniform``, ``zipf:<a>``, ``point:<v>`` or ``weights:<w0>,<w1>,...``."""
    kind, _, arg = dist.partition(":")
    kind = kind.strip().lower()
    try:
        if kind == "uniform" and not arg:
            return kind, None
        if kind == "zipf":
            a = float(arg)
            if not a >= 0 or math.isinf(a):
                raise InvalidDistributionParam(f"zipf exponent must be finite and >= 0, got {arg}")
            return kind, a
        if kind == "point":
            return kind, int(arg)
        if kind == "weights":
            w = [float(x) for x in arg.split(",")]
            if any(x < 0 for x in w) or sum(w) <= 0:
                raise InvalidDistributionParam("weights must be non-negative with a positive sum")
            return kind, w
    except ValueError as exc:
        if isinstance(exc, LDPError):
            raise
        raise InvalidDistributionParam(f"bad distribution parameter in {dist!r}") from exc
    raise InvalidDistributionParam(f"unknown distribution {dist!r}")


def distribution_probs(dist: str, k: int) -> np.ndarray:
    kind, arg = parse_distribution(dist)
    if kind == "uniform":
        return np.full(k, 1.0 / k)
    if kind == "zipf":
        w = 1.0 / np.arange(1, k + 1) ** arg
        return w / w.sum()
    if kind == "point":
        if not 0 <= arg < k:
            raise InvalidDistributionParam(f"point mass {arg} outside domain [0, {k})")
        out = np.zeros(k)
        out[arg] = 1.0
        return out
    if len(arg) != k:
        raise InvalidDistributionParam(f"{len(arg)} weights for domain size {k}")
    w = np.asarray(arg)
    return w / w.sum()


def gen_dataset(dist: str, n: int, ks, rng: np.random.Generator) -> np.ndarray:
    """``n`` i.i.d. user tuples, one column per attribute."""
    if n < 1:
        raise InvalidConfig(f"need at least one user, got n={n}")
    kind, arg = parse_distribution(dist)
    cols = []
    for k in ks:
        probs = distribution_probs(dist, k)
        if kind == "uniform":
            cols.append(rng.integers(k, size=n))
        elif kind == "point":
            cols.append(np.full(n, arg, dtype=np.int64))
        else:
            cols.append(rng.choice(k, size=n, p=probs))
    return np.stack(cols, axis=1).astype(np.int64)


# ---------------------------------------------------------------------------
# Configuration and results


@dataclass
class ExperimentConfig:
    task: str = "single"
    protocol: str = "grr"
    solution: str | None = None
    fake_mode: str = "zero"
    eps: float | None = None
    eps_perm: float | None = None
    eps_1: float | None = None
    n: int = 10_000
    ks: tuple[int, ...] = (5,)
    d_bits: int | None = None
    collections: int = 1
    dist: str = "uniform"
    seed: int = 0
    trials: int = 1
    postprocess: bool = False

    def __post_init__(self):
        self.ks = tuple(int(k) for k in self.ks)
        self.task = self.task.lower()
        self.protocol = self.protocol.lower()
        if self.solution is not None:
            self.solution = self.solution.lower().removeprefix("l-")

    @property
    def longitudinal(self) -> bool:
        return self.task in ("long", "long-mdim")

    def validate(self) -> "ExperimentConfig":
        if self.task not in TASKS:
            raise InvalidConfig(f"unknown task {self.task!r}; expected one of {TASKS}")
        if self.n < 1 or self.trials < 1 or self.collections < 1:
            raise InvalidConfig("n, trials and collections must all be >= 1")
        if not 0 <= self.seed < 2**64:
            raise InvalidConfig("seed must be an unsigned 64-bit integer")
        if self.task in ("single", "long") and len(self.ks) != 1:
            raise InvalidConfig(f"task {self.task} takes a single domain size")
        if self.longitudinal:
            if self.protocol.upper() not in LONG_PROTOCOLS:
                raise InvalidConfig(f"{self.protocol!r} is not a longitudinal protocol")
            if self.eps_perm is None:
                raise InvalidConfig("longitudinal tasks need --eps-perm")
            if self.protocol != "dbitflippm" and self.eps_1 is None:
                raise InvalidConfig("longitudinal tasks need --eps-1")
        else:
            if self.protocol not in ORACLES:
                raise InvalidConfig(f"{self.protocol!r} is not a single-collection oracle")
            if self.eps is None:
                raise InvalidConfig(f"task {self.task} needs --eps")
        if self.task == "mdim" and self.solution not in SOLUTIONS:
            raise InvalidConfig(f"mdim needs --solution in {SOLUTIONS}")
        if self.task == "long-mdim" and self.solution not in LONG_SOLUTIONS:
            raise InvalidConfig(f"long-mdim needs --solution in {LONG_SOLUTIONS}")
        if self.fake_mode not in FAKE_MODES:
            raise InvalidConfig(f"unknown fake mode {self.fake_mode!r}")
        for k in self.ks:
            distribution_probs(self.dist, k)
        try:
            build_pipeline(self)
        except LDPError:
            raise
        except ValueError as exc:
            raise InvalidConfig(str(exc)) from exc
        return self

    def to_dict(self) -> dict:
        out = asdict(self)
        out["ks"] = list(self.ks)
        return out


@dataclass
class ExperimentResult:
    config: dict
    true_freq: list[list[float]]
    est_freq: list[list[float]]
    mse: list[float]
    elapsed_ms: float
    runs: list = field(default_factory=list)  # [trial][collection][attribute] -> estimate

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "true_freq": self.true_freq,
            "est_freq": self.est_freq,
            "mse": self.mse,
            "elapsed_ms": self.elapsed_ms,
            "runs": self.runs,
        }

    def to_json(self, indent: int | None = None) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    def csv_rows(self) -> list[list]:
        rows = [["attr", "value", "true_freq", "est_freq", "mse"]]
        for j, (t, e) in enumerate(zip(self.true_freq, self.est_freq)):
            for v, (tv, ev) in enumerate(zip(t, e)):
                rows.append([j, v, tv, ev, self.mse[j]])
        return rows


# ---------------------------------------------------------------------------
# Pipelines: memoize -> report -> stats -> estimate


class _SingleTask:
    def __init__(self, oracle: Oracle):
        self.oracle = oracle

    def memoize(self, values, rng):
        return values[:, 0]

    def report(self, state, rng):
        return self.oracle.randomize(state, rng)

    def stats(self, batch):
        return self.oracle.counts(batch)

    def estimate(self, stats, n):
        return [self.oracle.estimate(stats, n)]

    def to_reports(self, batch):
        return self.oracle.to_reports(batch)


class _LongTask:
    def __init__(self, proto: LongProtocol):
        self.proto = proto

    def memoize(self, values, rng):
        return self.proto.memoize(values[:, 0], rng)

    def report(self, state, rng):
        return self.proto.report(state, rng)

    def stats(self, batch):
        return self.proto.stats(batch).ravel()

    def estimate(self, stats, n):
        if self.proto.is_dbit:
            stats = np.asarray(stats).reshape(2, -1)
        return [self.proto.estimate(stats, n)]

    def to_reports(self, batch):
        return self.proto.to_reports(batch)


class _MdimTask:
    def __init__(self, solution: MdimSolution):
        self.solution = solution

    def memoize(self, values, rng):
        return values

    def report(self, state, rng):
        return self.solution.randomize(state, rng)

    def stats(self, batch):
        return self.solution.stats(batch)

    def estimate(self, stats, n):
        return self.solution.estimate(stats, n)

    def to_reports(self, batch):
        return self.solution.to_reports(batch)


def build_pipeline(cfg: ExperimentConfig):
    if cfg.task == "single":
        return _SingleTask(Oracle(cfg.protocol, cfg.eps, cfg.ks[0]))
    if cfg.task == "long":
        return _LongTask(LongProtocol(cfg.protocol, cfg.eps_perm, cfg.eps_1, cfg.ks[0], cfg.d_bits))
    if cfg.task == "mdim":
        return _MdimTask(MdimSolution(MdimConfig(cfg.ks, cfg.eps, cfg.solution, cfg.protocol, cfg.fake_mode)))
    lcfg = LongMdimConfig(cfg.ks, cfg.eps_perm, cfg.eps_1, cfg.solution, cfg.protocol, cfg.d_bits)
    return LongMdimSolution(lcfg)


def _shards(n: int) -> list[tuple[int, int]]:
    return [(s, min(s + SHARD_SIZE, n)) for s in range(0, n, SHARD_SIZE)]


def run_experiment(cfg: ExperimentConfig, workers: int = 1, report_sink: IO[str] | None = None) -> ExperimentResult:
    """Simulate ``cfg.trials`` independent runs of the configured collection.

    Each trial draws a fresh dataset; ``true_freq`` and ``est_freq`` are the
    means over trials and ``mse`` scores every run against its own dataset.
    In longitudinal tasks each trial memoizes every user once and then runs
    ``cfg.collections`` collections from those memos; each collection is
    aggregated separately. ``report_sink`` receives the reports of the first
    collection of the first trial, one JSON object per line.
    """
    cfg.validate()
    start = time.perf_counter()
    pipeline = build_pipeline(cfg)
    shards = _shards(cfg.n)
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    pmap = pool.map if pool else map

    def each(fn, *iterables):
        return list(pmap(fn, *iterables))

    try:
        true_runs, runs = [], []
        for trial in range(cfg.trials):
            data = each(
                lambda i: gen_dataset(
                    cfg.dist, shards[i][1] - shards[i][0], cfg.ks, substream(cfg.seed, _DATA, trial, i)
                ),
                range(len(shards)),
            )
            true_runs.append(
                [sum(np.bincount(x[:, j], minlength=k) for x in data) / cfg.n for j, k in enumerate(cfg.ks)]
            )
            state = each(lambda i: pipeline.memoize(data[i], substream(cfg.seed, _MEMO, trial, i)), range(len(shards)))
            per_collection = []
            for c in range(cfg.collections):
                batches = each(
                    lambda i: pipeline.report(state[i], substream(cfg.seed, _REPORT, trial, c, i)),
                    range(len(shards)),
                )
                if report_sink is not None and trial == 0 and c == 0:
                    for b in batches:
                        write_reports(pipeline.to_reports(b), report_sink)
                stats = sum(each(pipeline.stats, batches))
                est = pipeline.estimate(stats, cfg.n)
                if cfg.postprocess:
                    est = [clip_renormalize(e) for e in est]
                per_collection.append([np.asarray(e, dtype=float).tolist() for e in est])
            runs.append(per_collection)
    finally:
        if pool:
            pool.shutdown()

    d = len(cfg.ks)
    # every collection of a trial is scored against that trial's dataset
    pairs = [(truth, attrs) for truth, trial in zip(true_runs, runs) for attrs in trial]
    true_freq = [np.mean([t[j] for t in true_runs], axis=0).tolist() for j in range(d)]
    est_freq = [np.mean([a[j] for _, a in pairs], axis=0).tolist() for j in range(d)]
    mse = [float(np.mean([np.mean((np.asarray(a[j]) - t[j]) ** 2) for t, a in pairs])) for j in range(d)]
    elapsed_ms = (time.perf_counter() - start) * 1000
    return ExperimentResult(cfg.to_dict(), true_freq, est_freq, mse, round(elapsed_ms, 3), runs)
