import numpy as np
import pytest

from ldpfreq.audit import enumerate_channel, long_mdim_channel, realized_epsilon
from ldpfreq.errors import EmptyGroupWarning, EmptyReportSet, InvalidConfig, ShapeMismatch
from ldpfreq.long_multidim import (
    LongMdimConfig,
    LongMdimSolution,
    LongMdimUser,
    build_memos,
    lsmp_aggregate,
    lsmp_client,
    lspl_aggregate,
    lspl_client,
)
from ldpfreq.longitudinal import LongProtocol
from ldpfreq.reports import SmpReport, Value

PROTOCOLS = ["L-GRR", "L-SUE", "L-OUE", "L-SOUE", "L-OSUE", "DBITFLIPPM"]


def _eps_1(protocol):
    return None if protocol == "DBITFLIPPM" else 0.3


@pytest.mark.parametrize("solution", ["spl", "smp"])
@pytest.mark.parametrize("protocol", PROTOCOLS)
def test_single_attribute_reduces_to_protocol(solution, protocol):
    cfg = LongMdimConfig((3,), 2.0, _eps_1(protocol), solution, protocol, d_bits=2)
    base = LongProtocol(protocol, 2.0, _eps_1(protocol), 3, d_bits=2)
    buckets = (0, 2)
    got = long_mdim_channel(cfg, buckets=buckets).probs
    if base.is_dbit:
        want = enumerate_channel(base.params, buckets=buckets).probs
    else:
        want = enumerate_channel(base.params, k=3).probs
    np.testing.assert_array_equal(got, want)


def test_config_checks():
    assert LongMdimConfig((3, 3), 2, 1, "L-SPL").solution == "spl"
    with pytest.raises(InvalidConfig):
        LongMdimConfig((3, 3), 2, 1, "rsfd")
    with pytest.raises(InvalidConfig):
        LongMdimConfig((3, 3), 2, 1, "smp", "grr")


def test_lspl_split_budgets():
    cfg = LongMdimConfig((3, 3), 2.0, 1.0, "spl", "L-GRR")
    for proto in cfg.protocols():
        assert proto.params.budget.eps_perm == 1.0
        assert proto.params.budget.eps_1 == 0.5
        assert realized_epsilon(enumerate_channel(proto.params)) == pytest.approx(0.5, abs=1e-9)
    assert realized_epsilon(long_mdim_channel(cfg)) == pytest.approx(1.0, abs=1e-9)


def test_lspl_dbit_splits_eps_perm():
    cfg = LongMdimConfig((4, 4), 2.0, None, "spl", "DBITFLIPPM", d_bits=2)
    assert all(p.params.eps_perm == 1.0 for p in cfg.protocols())
    smp = LongMdimConfig((4, 4), 2.0, None, "smp", "DBITFLIPPM", d_bits=2)
    assert all(p.params.eps_perm == 2.0 for p in smp.protocols())


def test_lspl_uniform_l_sue():
    rng = np.random.default_rng(808)
    sol = LongMdimSolution(LongMdimConfig((4, 4, 4), 2, 1, "spl", "L-SUE"))
    n = 1_000_000
    tuples = rng.integers(4, size=(n, 3))
    batch = sol.report(sol.memoize(tuples, rng), rng)
    for est in sol.estimate(sol.stats(batch), n):
        np.testing.assert_allclose(est, 0.25, atol=0.015)


def test_lsmp_memo_and_attribute_fixed_over_collections(rng):
    cfg = LongMdimConfig((3, 4, 5), 2.0, 1.0, "smp", "L-OSUE")
    tuples = [(0, 1, 2), (2, 3, 4), (1, 0, 0)]
    users = [LongMdimUser(cfg) for _ in tuples]
    seen = []
    for _ in range(5):
        reports = [lsmp_client(t, u, cfg, rng) for t, u in zip(tuples, users)]
        seen.append(([r.attr for r in reports], [dict(u.memos) for u in users]))
    attrs0, memos0 = seen[0]
    for attrs, memos in seen[1:]:
        assert attrs == attrs0
        for a, b in zip(memos, memos0):
            assert a.keys() == b.keys()
            assert all(a[key] is b[key] for key in a)


def test_lsmp_dbit_reports_identical_over_collections(rng):
    cfg = LongMdimConfig((4, 4), 2.0, None, "smp", "DBITFLIPPM", d_bits=2)
    user = LongMdimUser(cfg)
    first = lsmp_client((1, 3), user, cfg, rng)
    assert all(lsmp_client((1, 3), user, cfg, rng) == first for _ in range(5))


def test_lspl_per_user_path(rng):
    cfg = LongMdimConfig((3, 3), 4.0, 2.0, "spl", "L-GRR")
    tuples = np.zeros((6000, 2), dtype=int)
    reports = [lspl_client(t, build_memos(t, cfg, rng), cfg, rng) for t in tuples]
    for est in lspl_aggregate(reports, cfg):
        np.testing.assert_allclose(est, [1, 0, 0], atol=0.1)
    with pytest.raises(ShapeMismatch):
        lspl_client((0, 0), [], cfg, rng)
    with pytest.raises(EmptyReportSet):
        lspl_aggregate([], cfg)


def test_lsmp_empty_group(rng):
    cfg = LongMdimConfig((3, 3), 2.0, 1.0, "smp", "L-GRR")
    with pytest.warns(EmptyGroupWarning):
        est = lsmp_aggregate([SmpReport(0, Value(0))], cfg)
    np.testing.assert_array_equal(est[1], 0)


def test_lsmp_uniform_million_users():
    rng = np.random.default_rng(909)
    sol = LongMdimSolution(LongMdimConfig((4, 4, 4), 2, 1, "smp", "L-GRR"))
    n = 1_000_000
    batch = sol.report(sol.memoize(rng.integers(4, size=(n, 3)), rng), rng)
    for est in sol.estimate(sol.stats(batch), n):
        np.testing.assert_allclose(est, 0.25, atol=0.012)


@pytest.mark.parametrize("solution", ["spl", "smp"])
@pytest.mark.parametrize("protocol", ["L-GRR", "L-OUE", "DBITFLIPPM"])
def test_vectorized_reports_match_stats(rng, solution, protocol):
    cfg = LongMdimConfig((3, 4), 2.0, _eps_1(protocol), solution, protocol, d_bits=2)
    sol = LongMdimSolution(cfg)
    tuples = np.stack([rng.integers(3, size=600), rng.integers(4, size=600)], axis=1)
    batch = sol.report(sol.memoize(tuples, rng), rng)
    direct = sol.estimate(sol.stats(batch), 600)
    aggregate = lspl_aggregate if solution == "spl" else lsmp_aggregate
    for a, b in zip(direct, aggregate(sol.to_reports(batch), cfg)):
        np.testing.assert_allclose(a, b, atol=1e-12)
