import math
import warnings

import numpy as np
import pytest

from crdme.lattice import LatticeSpec, Voxel
from crdme.pair import (
    PairConfig,
    PairState,
    pair_propensities,
    reaction_rate_table,
    run_replicates,
    simulate_pair,
    simulate_pair_race,
)
from crdme.stats import ks_two_sample, mean_ci
from crdme.streams import stream
from crdme.tables import PhiTable

L, D, RB = 0.05, 10.0, 1e-3


def cfg(N, lam=1e9, engine="crdme", **kw):
    return PairConfig(D, D, LatticeSpec(L, N), lam, RB, engine, **kw)


def test_propensities_hops_only(tables):
    c = cfg(25)  # rho = 0.5
    ch = pair_propensities(PairState(Voxel(5, 5), Voxel(9, 5)), c, tables.phi(0.5))
    assert len(ch) == 8
    assert all(a[0] == "hop" for _, a in ch)
    assert all(math.isclose(r, D / c.lattice.h**2) for r, _ in ch)


def test_propensities_rdme_same_voxel():
    c = cfg(25, engine="rdme")
    ch = pair_propensities(PairState(Voxel(5, 5), Voxel(5, 5)), c)
    assert len(ch) == 9
    react = [r for r, a in ch if a == ("react",)]
    assert react == [pytest.approx(1e9 * math.pi * RB**2 / c.lattice.h**2, rel=1e-14)]


def test_propensities_crdme_neighbor(tables):
    c = cfg(25)
    t = tables.phi(0.5)
    ch = pair_propensities(PairState(Voxel(0, 0), Voxel(1, 1)), c, t)
    # A in the corner has 2 moves, B interior has 4, plus the reaction
    assert len(ch) == 7
    assert dict((a, r) for r, a in ch)[("react",)] == 1e9 * t[(1, 1)]
    rates, C = reaction_rate_table(c, t)
    assert C == t.cutoff and rates[C, C] == 1e9 * t[(0, 0)]


def test_rho_mismatch_rejected(tables):
    with pytest.raises(ValueError, match="rho"):
        reaction_rate_table(cfg(50), tables.phi(0.5))


def test_config_validation():
    with pytest.raises(ValueError):
        cfg(25, engine="bogus")
    with pytest.raises(ValueError):
        PairConfig(-1.0, D, LatticeSpec(L, 5), 1.0, RB)
    assert cfg(25, engine="rdme").rdme_k == pytest.approx(1e9 * math.pi * RB**2)
    with pytest.warns(UserWarning):
        PairConfig(D, D, LatticeSpec(5e-4, 1), 1.0, RB)


def test_zero_lambda_censored(tables):
    c = cfg(25, lam=0.0)
    for r in range(20):
        t, cens = simulate_pair(c, tables.phi(0.5), stream(1, r), t_max=1e-5)
        assert cens and t == 1e-5


def _single_voxel(engine):
    # rho = 2 >= sqrt(2): phi_00 = 1
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return PairConfig(D, D, LatticeSpec(5e-4, 1), 1e3, RB, engine)


def test_single_voxel_crdme_is_exponential(tables):
    t2 = tables.phi(2.0)
    assert t2[(0, 0)] == 1.0
    s = run_replicates(_single_voxel("crdme"), t2, 10**5, 3)
    m, half = mean_ci(s)
    se = half / 1.959963984540054
    assert abs(m - 1e-3) < 3 * se


def test_single_voxel_rdme_is_exponential():
    c = _single_voxel("rdme")
    rate = c.rdme_k / c.lattice.h**2
    s = run_replicates(c, None, 10**5, 4)
    m, half = mean_ci(s)
    assert abs(m - 1.0 / rate) < 3 * half / 1.959963984540054


def test_replicates_deterministic(tables):
    a = run_replicates(cfg(25), tables.phi(0.5), 300, 99)
    b = run_replicates(cfg(25), tables.phi(0.5), 300, 99)
    assert np.array_equal(a.times, b.times)
    assert a.times[7] == simulate_pair(cfg(25), tables.phi(0.5), stream(99, 7))[0]


def test_replicates_independent_of_workers(tables):
    a = run_replicates(cfg(25), tables.phi(0.5), 600, 5, workers=1)
    b = run_replicates(cfg(25), tables.phi(0.5), 600, 5, workers=3)
    assert np.array_equal(a.times, b.times)


def test_disjoint_seeds_same_law(tables):
    a = run_replicates(cfg(25), tables.phi(0.5), 3000, 1)
    b = run_replicates(cfg(25), tables.phi(0.5), 3000, 2)
    assert ks_two_sample(a, b)[1] > 0.01


def test_race_matches_direct(tables):
    # N = 8 with rho = 0.5
    c = PairConfig(D, D, LatticeSpec(0.016, 8), 1e9, RB)
    t = tables.phi(0.5)
    a = run_replicates(c, t, 10**5, 10)
    b = run_replicates(c, t, 10**5, 11, race=True)
    assert ks_two_sample(a, b)[1] > 0.01
    assert simulate_pair_race(c, t, stream(3))[1] is False


def test_crdme_with_point_table_is_rdme():
    rho = 0.5
    point = PhiTable(rho=rho, cutoff=0, values=np.array([[math.pi * rho * rho]]))
    a = run_replicates(cfg(25), point, 2000, 8)
    b = run_replicates(cfg(25, engine="rdme"), None, 2000, 8)
    np.testing.assert_allclose(a.times, b.times, rtol=1e-12)


def test_mean_decreases_with_lambda(tables):
    cis = []
    for lam in (1e7, 1e8, 1e9):
        cis.append(mean_ci(run_replicates(cfg(25, lam=lam), tables.phi(0.5), 3000, 21)))
    for (m0, h0), (m1, h1) in zip(cis, cis[1:]):
        assert m1 + h1 < m0 - h0


@pytest.mark.parametrize("engine", ["crdme", "rdme"])
def test_mean_matches_linear_solve(tables, engine):
    from oracles import exact_pair_mean

    lat = LatticeSpec(0.016, 8)
    cfg = PairConfig(10.0, 5.0, lat, 1e9, 1e-3, engine)
    t = tables.phi(0.5)
    if engine == "crdme":
        rate = lambda dx, dy: 1e9 * t[(dx, dy)]  # noqa: E731
    else:
        rate = lambda dx, dy: cfg.rdme_k / lat.h**2 if dx == dy == 0 else 0.0  # noqa: E731
    want = exact_pair_mean(8, 0.016, 10.0, 5.0, rate)
    m, ci = mean_ci(run_replicates(cfg, t if engine == "crdme" else None, 20000, 77))
    assert abs(m - want) < 4 * ci / 1.96
