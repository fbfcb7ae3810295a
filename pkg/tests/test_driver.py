"""Tests for driver processes, the stable samplers, path tables, and payloads."""

import json

import numpy as np
import pytest
from scipy import stats

from cyllevy.driver import (
    Driver,
    PathTable,
    cms_symmetric_stable,
    decoupled_driver,
    driver_from_payload,
    driver_to_payload,
    positive_stable,
)
from cyllevy.linalg import HSMap, Partition
from cyllevy.rng import derive


# ---------------------------------------------------------------------------
# stable samplers


@pytest.mark.parametrize("a", [0.4, 0.75])
def test_positive_stable_laplace_transform(a):
    rng = derive(100, "driver", "kanter", str(a))
    s = positive_stable(a, 200_000, rng)
    assert np.all(s > 0)
    for lam in (0.5, 1.0, 2.0):
        vals = np.exp(-lam * s)
        est = vals.mean()
        se = vals.std() / np.sqrt(vals.size)
        target = np.exp(-(lam**a))
        assert abs(est - target) < 5.0 * se, f"lam={lam}: {est} vs {target}"


def test_positive_stable_rejects_bad_index():
    rng = derive(1, "driver", "kanter-bad")
    for a in (0.0, 1.0, 1.5, -0.2):
        with pytest.raises(ValueError):
            positive_stable(a, 10, rng)


@pytest.mark.parametrize("alpha", [0.8, 1.0, 1.5])
def test_cms_sampler_characteristic_function(alpha):
    rng = derive(100, "driver", "cms", str(alpha))
    x = cms_symmetric_stable(alpha, 200_000, rng)
    for t in (0.5, 1.5):
        vals = np.cos(t * x)
        est = vals.mean()
        se = vals.std() / np.sqrt(vals.size)
        target = np.exp(-abs(t) ** alpha)
        assert abs(est - target) < 5.0 * se, f"t={t}: {est} vs {target}"


def test_cms_rejects_bad_index():
    rng = derive(1, "driver", "cms-bad")
    for alpha in (0.0, 2.0, 2.5):
        with pytest.raises(ValueError):
            cms_symmetric_stable(alpha, 10, rng)


def test_subordinated_route_matches_direct_sampler():
    # one-dimensional canonical stable increments over unit time against the
    # trigonometric sampler: same law, independent constructions
    alpha = 1.3
    driver = Driver.canonical_stable(alpha, 1)
    inc = driver.sample_g_increments(1.0, 20_000, derive(101, "driver", "route-a"))[:, 0]
    direct = cms_symmetric_stable(alpha, 20_000, derive(101, "driver", "route-b"))
    _, p = stats.ks_2samp(inc, direct)
    assert p > 0.01


# ---------------------------------------------------------------------------
# increments vs the symbol


def _test_drivers():
    atoms = np.array([[0.4, -0.2, 0.1], [2.5, 0.0, -1.0], [-0.6, 0.8, 0.3]])
    rates = np.array([1.2, 0.5, 0.9])
    cov = np.array([[0.5, 0.1, 0.0], [0.1, 0.4, -0.05], [0.0, -0.05, 0.3]])
    gauss = Driver.gaussian(np.array([0.3, -0.5, 0.2]), cov)
    cp = Driver.compound_poisson(atoms, rates, drift=np.array([0.1, 0.0, -0.2]), cov=0.1 * np.eye(3))
    iso = Driver.canonical_stable(1.5, 3)
    diag = Driver.diagonal_stable(np.array([0.9, 1.2, 1.6]), np.array([0.5, 0.8, 0.4]))
    return [
        ("gaussian", gauss),
        ("compound-poisson", cp),
        ("canonical-stable", iso),
        ("diagonal-stable", diag),
        ("sum", Driver.sum_of(gauss, cp)),
    ]


@pytest.mark.parametrize("kind,driver", _test_drivers(), ids=[k for k, _ in _test_drivers()])
def test_increments_match_symbol(kind, driver):
    n = 40_000
    dt = 0.7
    rng = derive(102, "driver", "ecf", kind)
    inc = driver.sample_g_increments(dt, n, rng)
    assert inc.shape == (n, 3)
    for g in (np.array([0.8, 0.0, -0.3]), np.array([-0.4, 1.1, 0.6])):
        phases = inc @ g
        ecf = np.exp(1j * phases).mean()
        target = driver.symbol(g, dt)
        assert abs(ecf - target) < 4.0 / np.sqrt(n), f"g={g}: {ecf} vs {target}"


def test_symbol_of_sum_is_sum_of_symbols():
    drivers = dict(_test_drivers())
    g = np.array([0.5, -0.2, 0.9])
    total = drivers["sum"].log_symbol(g)
    parts = drivers["gaussian"].log_symbol(g) + drivers["compound-poisson"].log_symbol(g)
    assert total == pytest.approx(parts, rel=1e-12)


def test_heavy_tail_increments():
    driver = Driver.canonical_stable(1.2, 2)
    inc = driver.sample_g_increments(1.0, 10_000, derive(103, "driver", "tails"))
    norms = np.linalg.norm(inc, axis=1)
    assert norms.max() > 10.0 * np.median(norms)


def test_compound_poisson_jump_counts():
    atoms = np.array([[0.5, 0.0], [0.0, -0.7]])
    rates = np.array([1.5, 0.8])
    driver = Driver.compound_poisson(atoms, rates)
    dt = 0.4
    _, counts = driver.sample_g_increments(dt, 20_000, derive(104, "driver", "counts"), with_counts=True)
    lam = rates.sum() * dt
    se = np.sqrt(lam / 20_000)
    assert abs(counts.mean() - lam) < 4.0 * se
    gauss = Driver.gaussian(np.zeros(2), np.eye(2))
    _, gcounts = gauss.sample_g_increments(dt, 100, derive(104, "driver", "counts0"), with_counts=True)
    assert np.all(gcounts == 0)


def test_moment_rates_hand_values():
    atoms = np.array([[0.5, 0.0], [3.0, -0.4]])
    rates = np.array([1.0, 0.6])
    drift = np.array([0.2, -0.1])
    q = 0.3 * np.eye(2)
    driver = Driver.compound_poisson(atoms, rates, drift=drift, cov=q)
    # compensation keeps only the coordinates inside the unit interval
    comp = 1.0 * np.array([0.5, 0.0]) + 0.6 * np.array([0.0, -0.4])
    expect_mean = drift - comp + rates @ atoms
    np.testing.assert_allclose(driver.mean_rate(), expect_mean, rtol=1e-12)
    expect_cov = q + (atoms * rates[:, None]).T @ atoms
    np.testing.assert_allclose(driver.covariance_rate(), expect_cov, rtol=1e-12)
    assert Driver.canonical_stable(1.5, 2).mean_rate() is None
    assert Driver.canonical_stable(1.5, 2).covariance_rate() is None
    both = Driver.sum_of(driver, Driver.gaussian(np.ones(2), np.eye(2)))
    np.testing.assert_allclose(both.mean_rate(), expect_mean + 1.0, rtol=1e-12)
    assert Driver.sum_of(driver, Driver.canonical_stable(1.1, 2)).mean_rate() is None


def test_compound_poisson_increment_mean_monte_carlo():
    atoms = np.array([[0.5, 0.2], [-1.5, 0.9]])
    rates = np.array([1.1, 0.7])
    driver = Driver.compound_poisson(atoms, rates, drift=np.array([0.3, 0.0]))
    dt = 0.25
    n = 100_000
    inc = driver.sample_g_increments(dt, n, derive(105, "driver", "mean-mc"))
    est = inc.mean(axis=0) / dt
    se = inc.std(axis=0) / np.sqrt(n) / dt
    np.testing.assert_array_less(np.abs(est - driver.mean_rate()), 4.0 * se + 1e-12)


# ---------------------------------------------------------------------------
# determinism, streams, decoupling


def test_sampling_is_deterministic_in_the_seed():
    driver = Driver.diagonal_stable(np.array([1.1, 1.6]), np.array([0.5, 1.0]))
    a = driver.sample_g_increments(0.5, (7, 3), derive(9, "driver", "det"))
    b = driver.sample_g_increments(0.5, (7, 3), derive(9, "driver", "det"))
    np.testing.assert_array_equal(a, b)
    c = driver.sample_g_increments(0.5, (7, 3), derive(10, "driver", "det"))
    assert not np.array_equal(a, c)


def test_driver_stream_used_when_no_generator_passed():
    driver = Driver.gaussian(np.zeros(2), np.eye(2), stream=derive(11, "driver", "stream"))
    a = driver.sample_g_increments(1.0, 5)
    b = driver.sample_g_increments(1.0, 5)
    assert not np.array_equal(a, b)  # the stream advances
    bare = Driver.gaussian(np.zeros(2), np.eye(2))
    with pytest.raises(ValueError):
        bare.sample_g_increments(1.0, 5)
    with pytest.raises(ValueError):
        driver.sample_g_increments(0.0, 5, derive(1, "x"))


def test_decoupled_driver_checks_the_stream():
    driver = Driver.canonical_stable(1.4, 2, stream=derive(12, "driver", "dup"))
    with pytest.raises(ValueError):
        decoupled_driver(driver, None)
    with pytest.raises(ValueError):
        decoupled_driver(driver, driver.stream)
    with pytest.raises(ValueError):
        decoupled_driver(driver, derive(12, "driver", "dup"))
    other = decoupled_driver(driver, derive(13, "driver", "dup"))
    assert other.kind == driver.kind
    a = driver.sample_g_increments(1.0, 50)
    b = other.sample_g_increments(1.0, 50)
    assert not np.array_equal(a, b)


# ---------------------------------------------------------------------------
# path tables


def test_path_table_sample_and_values():
    driver = Driver.compound_poisson(
        np.array([[0.5, 0.0], [-0.3, 0.8]]), np.array([2.0, 1.0]), drift=np.array([0.1, 0.2])
    )
    phi = HSMap(np.array([[1.0, 0.0], [0.5, 1.0], [0.0, -1.0]]))
    part = Partition.dyadic(3)
    table = PathTable.sample(driver, phi, part, seed=77)
    again = PathTable.sample(driver, phi, part, seed=77)
    np.testing.assert_array_equal(table.increments, again.increments)
    np.testing.assert_array_equal(table.counts, again.counts)
    assert table.seed == 77
    assert table.increments.shape == (8, 3)
    vals = table.values
    assert vals.shape == (9, 3)
    np.testing.assert_allclose(vals[0], 0.0)
    np.testing.assert_allclose(vals[-1], table.increments.sum(axis=0), rtol=1e-12)
    other = PathTable.sample(driver, phi, part, seed=78)
    assert not np.array_equal(table.increments, other.increments)


def test_path_table_aggregation():
    fine_part = Partition.dyadic(3)
    rng = derive(14, "driver", "agg")
    inc = rng.normal(size=(8, 2))
    counts = rng.poisson(1.0, size=8)
    fine = PathTable(fine_part, inc, seed=1, counts=counts)
    coarse = PathTable.aggregate(fine, Partition.dyadic(1))
    assert coarse.increments.shape == (2, 2)
    np.testing.assert_allclose(coarse.increments[0], inc[:4].sum(axis=0), rtol=1e-12)
    np.testing.assert_allclose(coarse.increments[1], inc[4:].sum(axis=0), rtol=1e-12)
    np.testing.assert_array_equal(coarse.counts, [counts[:4].sum(), counts[4:].sum()])
    assert coarse.seed == fine.seed
    with pytest.raises(ValueError):
        PathTable.aggregate(fine, Partition(np.array([0.0, 0.3, 1.0])))


def test_path_table_validation():
    part = Partition.dyadic(2)
    with pytest.raises(ValueError):
        PathTable(part, np.zeros((3, 2)), seed=0)
    with pytest.raises(ValueError):
        PathTable(part, np.zeros((4, 2)), seed=0, counts=np.zeros(3, dtype=int))


def test_path_table_csv(tmp_path):
    part = Partition.regular(4, 0.0, 2.0)
    inc = np.array([[0.25, -1.0], [0.5, 2.0], [-0.125, 0.0], [1.0, 1e-17]])
    table = PathTable(part, inc, seed=5)
    out = tmp_path / "path.csv"
    table.to_csv(out)
    lines = out.read_text().strip().split("\n")
    assert lines[0] == "t,x1,x2"
    assert len(lines) == 5
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    np.testing.assert_allclose(data[:, 0], part.points[1:])
    np.testing.assert_array_equal(data[:, 1:], inc)  # %.17g round-trips exactly


# ---------------------------------------------------------------------------
# payloads


def test_driver_payload_round_trip():
    for kind, driver in _test_drivers():
        wire = json.loads(json.dumps(driver_to_payload(driver)))
        back = driver_from_payload(wire)
        assert back.kind == kind
        assert back.dim == driver.dim
        g = np.array([0.3, -0.7, 0.4])
        assert back.log_symbol(g) == pytest.approx(driver.log_symbol(g), rel=1e-12)


def test_driver_payload_rejects_unknown_fields():
    wire = driver_to_payload(Driver.gaussian(np.zeros(2), np.eye(2)))
    wire["spare"] = 1
    with pytest.raises(ValueError):
        driver_from_payload(wire)
    with pytest.raises(ValueError):
        driver_from_payload({"kind": "mystery", "drift": [0.0], "cov": [[1.0]]})
    sum_wire = driver_to_payload(Driver.sum_of(Driver.gaussian(np.zeros(2), np.eye(2)), Driver.canonical_stable(1.5, 2)))
    sum_wire["extra"] = True
    with pytest.raises(ValueError):
        driver_from_payload(sum_wire)


def test_sum_driver_validation():
    g = Driver.gaussian(np.zeros(2), np.eye(2))
    with pytest.raises(ValueError):
        Driver.sum_of(g)
    with pytest.raises(ValueError):
        Driver.sum_of(g, Driver.canonical_stable(1.5, 3))
    with pytest.raises(ValueError):
        Driver(None, "sum", components=())
    with pytest.raises(ValueError):
        Driver(g.chars, "compound-poisson")
