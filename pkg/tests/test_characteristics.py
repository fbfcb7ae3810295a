"""Tests for characteristic triplets, pushforwards, composition, and the
partition-limit estimators."""

import json

import numpy as np
import pytest

from cyllevy.characteristics import (
    CylCharacteristics,
    GenuineTriplet,
    MCEstimate,
    chars_from_payload,
    chars_to_payload,
    compose_contraction,
    coordinate_truncation,
    jumps_from_payload,
    log_symbol,
    partition_drift_estimate,
    partition_energy_estimate,
    pushforward,
    s_operator,
    symbol_eval,
    triplet_to_payload,
)
from cyllevy.driver import Driver
from cyllevy.linalg import Contraction, HSMap
from cyllevy.measures import (
    AtomicJumps,
    CanonicalStableJumps,
    DiagonalStableJumps,
    NoJumps,
)
from cyllevy.rng import derive


def test_coordinate_truncation_zeroes_large_coordinates():
    h = np.array([0.5, -1.0, 1.5, -3.0])
    np.testing.assert_array_equal(coordinate_truncation(h), [0.5, -1.0, 0.0, 0.0])


def test_log_symbol_atomic_hand_value():
    a = np.array([0.5, -0.2])
    q = np.diag([0.3, 0.1])
    atom = np.array([0.4, 0.2])
    r = 1.5
    chars = CylCharacteristics(a, q, AtomicJumps(atom[None, :], np.array([r])))
    g = np.array([1.2, -0.7])
    a_eff = a - r * atom
    expect = (
        1j * (a_eff @ g)
        - 0.5 * (g @ q @ g)
        + r * (np.exp(1j * (g @ atom)) - 1.0)
    )
    assert log_symbol(chars, g) == pytest.approx(expect, rel=1e-12)


def test_log_symbol_skips_compensation_outside_unit_box():
    # an atom with every coordinate beyond one is not compensated at all
    a = np.array([0.3, 0.0])
    atom = np.array([3.0, -2.0])
    chars = CylCharacteristics(a, np.zeros((2, 2)), AtomicJumps(atom[None, :], np.array([0.7])))
    np.testing.assert_allclose(chars.effective_drift, a)
    g = np.array([0.4, 0.9])
    expect = 1j * (a @ g) + 0.7 * (np.exp(1j * (g @ atom)) - 1.0)
    assert log_symbol(chars, g) == pytest.approx(expect, rel=1e-12)


def test_log_symbol_stable_kinds():
    g = np.array([0.8, -1.1, 0.3])
    iso = CylCharacteristics(np.zeros(3), np.zeros((3, 3)), CanonicalStableJumps(1.4))
    assert log_symbol(iso, g) == pytest.approx(-np.linalg.norm(g) ** 1.4, rel=1e-12)
    alphas = np.array([0.9, 1.3, 1.7])
    scales = np.array([0.5, 1.0, 0.8])
    diag = CylCharacteristics(np.zeros(3), np.zeros((3, 3)), DiagonalStableJumps(alphas, scales))
    expect = -np.sum((scales * np.abs(g)) ** alphas)
    assert log_symbol(diag, g) == pytest.approx(expect, rel=1e-12)


def test_symbol_eval_is_a_characteristic_function_value():
    rng = derive(7, "chars", "symbol")
    chars = CylCharacteristics(
        np.array([0.2, -0.4]),
        np.array([[0.5, 0.1], [0.1, 0.3]]),
        AtomicJumps(np.array([[0.3, -0.6], [2.0, 0.5]]), np.array([1.0, 0.4])),
    )
    for _ in range(20):
        g = rng.normal(size=2) * 3.0
        val = symbol_eval(chars, g, t=rng.uniform(0.1, 2.0))
        assert abs(val) <= 1.0 + 1e-12
    assert symbol_eval(chars, np.zeros(2)) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        symbol_eval(chars, np.zeros(2), t=-0.5)


def test_characteristics_validation():
    with pytest.raises(ValueError):
        CylCharacteristics(np.zeros((2, 2)), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        CylCharacteristics(np.zeros(2), np.zeros((3, 3)))
    with pytest.raises(ValueError):
        CylCharacteristics(np.zeros(2), np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        CylCharacteristics(np.zeros(2), -np.eye(2))
    with pytest.raises(ValueError):
        CylCharacteristics(np.zeros(3), np.zeros((3, 3)), AtomicJumps(np.ones((1, 2)), np.ones(1)))
    with pytest.raises(ValueError):
        log_symbol(CylCharacteristics.zero(2), np.zeros(3))


def test_pushforward_atomic_hand_value():
    # a single atom at (3, 0): outside the unit ball, so it contributes its
    # clipped direction to the mapped drift
    r = 0.7
    chars = CylCharacteristics(
        np.zeros(2), np.zeros((2, 2)), AtomicJumps(np.array([[3.0, 0.0]]), np.array([r]))
    )
    trip = pushforward(chars, HSMap(np.eye(2)))
    np.testing.assert_allclose(trip.drift, [r, 0.0], atol=1e-14)
    np.testing.assert_allclose(trip.cov, np.zeros((2, 2)))
    np.testing.assert_allclose(trip.jumps.atoms, [[3.0, 0.0]])


def test_pushforward_requires_matching_dimension():
    with pytest.raises(ValueError):
        pushforward(CylCharacteristics.zero(2), HSMap(np.eye(3)))


def test_pushforward_gaussian_covariance():
    rng = derive(7, "chars", "push-cov")
    q = rng.normal(size=(3, 3))
    q = q @ q.T
    phi = HSMap(rng.normal(size=(2, 3)))
    trip = pushforward(CylCharacteristics(np.zeros(3), q), phi)
    np.testing.assert_allclose(trip.cov, phi.matrix @ q @ phi.matrix.T, rtol=1e-12)


@pytest.mark.parametrize("kind", ["atomic", "canonical-stable", "diagonal-stable", "gaussian"])
def test_pushforward_char_function_matches_symbol(kind):
    # the mapped triplet and the source symbol describe the same process:
    # log_char(u) must equal S(phi^T u) for every u
    rng = derive(11, "chars", "push-symbol", kind)
    d_g, d_h = 4, 3
    a = rng.normal(size=d_g) * 0.5
    q = np.zeros((d_g, d_g))
    if kind == "gaussian":
        m = rng.normal(size=(d_g, d_g))
        q = m @ m.T / d_g
        jumps = NoJumps()
    elif kind == "atomic":
        jumps = AtomicJumps(rng.normal(size=(5, d_g)) * 1.4, rng.uniform(0.2, 1.0, size=5))
    elif kind == "canonical-stable":
        jumps = CanonicalStableJumps(1.3)
    else:
        jumps = DiagonalStableJumps(rng.uniform(0.6, 1.8, size=d_g), rng.uniform(0.3, 1.2, size=d_g))
    chars = CylCharacteristics(a, q, jumps)
    phi = HSMap(rng.normal(size=(d_h, d_g)))
    trip = pushforward(chars, phi)
    for _ in range(12):
        u = rng.normal(size=d_h) * 1.5
        lhs = trip.log_char(u)
        rhs = log_symbol(chars, phi.adjoint_apply(u))
        assert lhs == pytest.approx(rhs, rel=1e-11, abs=1e-11)


def test_compose_contraction_hand_value():
    r = 0.7
    chars = CylCharacteristics(
        np.zeros(2), np.zeros((2, 2)), AtomicJumps(np.array([[3.0, 0.0]]), np.array([r]))
    )
    trip = pushforward(chars, HSMap(np.eye(2)))
    o = Contraction(np.diag([1.0 / 3.0, 1.0]))
    # O b = (r/3, 0); the tail correction is clip(O h) - O clip(h) = (2/3, 0)
    # per unit rate, so the composed drift is r * (1/3 + 2/3, 0) = (r, 0)
    np.testing.assert_allclose(compose_contraction(trip, o), [r, 0.0], atol=1e-12)


def test_compose_contraction_symmetric_measure_is_exact():
    atoms = np.array([[2.0, 1.0], [-2.0, -1.0]])
    chars = CylCharacteristics(
        np.zeros(2), np.zeros((2, 2)), AtomicJumps(atoms, np.array([0.5, 0.5]))
    )
    trip = pushforward(chars, HSMap(np.eye(2)))
    rng = derive(3, "chars", "compose-sym")
    m = rng.normal(size=(2, 2))
    o = Contraction(0.9 * m / np.linalg.norm(m, 2))
    np.testing.assert_allclose(compose_contraction(trip, o), o.matrix @ trip.drift, atol=1e-14)


def test_compose_contraction_dimension_check():
    trip = GenuineTriplet(np.zeros(2), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        compose_contraction(trip, Contraction(np.eye(3)))


def test_s_operator_hand_value():
    q = np.diag([0.2, 0.4])
    r = 1.3
    chars = CylCharacteristics(
        np.zeros(2), q, AtomicJumps(np.array([[0.5, 0.0]]), np.array([r]))
    )
    trip = pushforward(chars, HSMap(np.eye(2)))
    s = s_operator(trip)
    expect = q + r * 0.25 * np.outer([1.0, 0.0], [1.0, 0.0])
    np.testing.assert_allclose(s.matrix, expect, rtol=1e-12)
    h1, h2 = np.array([1.0, 2.0]), np.array([-0.5, 1.0])
    assert s(h1, h2) == pytest.approx(float(h1 @ expect @ h2), rel=1e-12)


def test_s_operator_without_jumps_is_the_covariance():
    trip = GenuineTriplet(np.zeros(2), np.diag([0.3, 0.9]))
    np.testing.assert_allclose(s_operator(trip).matrix, np.diag([0.3, 0.9]))


def test_s_operator_requires_symmetry():
    with pytest.raises(ValueError):
        from cyllevy.characteristics import SOperator

        SOperator(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_is_symmetric_detection():
    atoms = np.array([[0.5, 0.0], [-0.5, 0.0]])
    rates = np.array([1.0, 1.0])
    # declared drift equal to the compensation leaves zero effective drift
    comp = np.sum(rates[:, None] * atoms, axis=0)
    chars = CylCharacteristics(comp, np.eye(2), AtomicJumps(atoms, rates))
    assert chars.is_symmetric
    assert not CylCharacteristics(np.array([0.1, 0.0]), np.eye(2)).is_symmetric
    assert CylCharacteristics.zero(2).is_symmetric


def test_payload_round_trip_all_variants():
    variants = [
        NoJumps(),
        AtomicJumps(np.array([[0.3, -0.6], [2.0, 0.5]]), np.array([1.0, 0.4])),
        CanonicalStableJumps(1.2),
        DiagonalStableJumps(np.array([0.8, 1.6]), np.array([0.5, 1.0])),
    ]
    for jumps in variants:
        chars = CylCharacteristics(np.array([0.1, -0.2]), np.diag([0.3, 0.4]), jumps)
        wire = json.loads(json.dumps(chars_to_payload(chars)))
        back = chars_from_payload(wire)
        np.testing.assert_allclose(back.drift, chars.drift)
        np.testing.assert_allclose(back.cov, chars.cov)
        g = np.array([0.7, -1.3])
        assert log_symbol(back, g) == pytest.approx(log_symbol(chars, g), rel=1e-12)


def test_triplet_payload_covers_mapped_stable():
    chars = CylCharacteristics(np.zeros(2), np.zeros((2, 2)), CanonicalStableJumps(1.5))
    trip = pushforward(chars, HSMap(np.array([[1.0, 0.5], [0.0, 2.0]])))
    wire = json.loads(json.dumps(triplet_to_payload(trip)))
    assert wire["jumps"]["variant"] == "mapped-stable"
    back = jumps_from_payload(wire["jumps"])
    np.testing.assert_allclose(back.matrix, trip.jumps.matrix)
    assert back.alpha == trip.jumps.alpha


def test_payload_rejects_unknown_fields_and_variants():
    chars = CylCharacteristics.zero(2)
    wire = chars_to_payload(chars)
    wire["extra"] = 1
    with pytest.raises(ValueError):
        chars_from_payload(wire)
    with pytest.raises(ValueError):
        jumps_from_payload({"variant": "mystery", "payload": {}})
    with pytest.raises(ValueError):
        jumps_from_payload({"variant": "zero", "payload": {}, "spare": 0})


def test_mc_estimate_distance():
    est = MCEstimate(np.array([1.0, 2.0]), 0.1, 1000)
    assert est.distance_to([1.0, 0.0]) == pytest.approx(2.0)


def test_partition_drift_estimate_exact_for_small_gaussian():
    # with tiny covariance no increment ever leaves the unit ball, so the
    # control-variate statistic vanishes identically and the estimate equals
    # the exact mean at every mesh
    drift = np.array([0.4, -0.8, 0.2])
    driver = Driver.gaussian(drift, 0.0025 * np.eye(3))
    phi = HSMap(np.array([[1.0, 0.0, 0.5], [0.0, -1.0, 0.3]]))
    rng = derive(21, "chars", "drift-exact")
    ests = partition_drift_estimate(
        driver, phi, span=(0.0, 1.0), mesh_exponents=range(2, 6), mc_samples=1000, rng=rng
    )
    assert [e.mesh for e in ests] == [4, 8, 16, 32]
    for e in ests:
        np.testing.assert_allclose(e.value, phi(drift), rtol=1e-9)
        assert e.stderr < 1e-9
        assert e.n_samples == 1000


def test_partition_energy_estimate_exact_for_small_gaussian():
    drift = np.array([0.4, -0.8])
    cov = 0.0025 * np.eye(2)
    driver = Driver.gaussian(drift, cov)
    phi = HSMap(np.eye(2))
    rng = derive(21, "chars", "energy-exact")
    ests = partition_energy_estimate(
        driver, phi, span=(0.0, 1.0), mesh_exponents=[3, 5, 7], mc_samples=1000, rng=rng
    )
    trace = float(np.trace(cov))
    mean_sq = float(drift @ drift)
    for e in ests:
        n = e.mesh
        expect = trace + mean_sq / n
        assert e.value == pytest.approx(expect, rel=1e-9)
    # the drift contribution dies off with the mesh, leaving the Gaussian energy
    assert abs(ests[-1].value - trace) < abs(ests[0].value - trace)


def test_partition_drift_strategies_agree():
    atoms = np.array([[0.5, 0.2], [-0.5, -0.2], [1.6, -0.4], [-1.6, 0.4]])
    rates = np.full(4, 0.8)
    driver = Driver.compound_poisson(atoms, rates, drift=np.zeros(2))
    phi = HSMap(np.array([[0.8, 0.1], [-0.2, 1.1]]))
    results = {}
    for strat in ("plain", "mean-cv", "antithetic"):
        rng = derive(22, "chars", "strategies", strat)
        ests = partition_drift_estimate(
            driver, phi, mesh_exponents=[4], mc_samples=4000, rng=rng, strategy=strat
        )
        results[strat] = ests[0]
    for a in ("mean-cv", "antithetic"):
        gap = results["plain"].distance_to(results[a].value)
        tol = 4.0 * (results["plain"].stderr + results[a].stderr)
        assert gap < tol, f"{a}: gap {gap} vs tol {tol}"


def test_partition_estimate_validation():
    driver = Driver.gaussian(np.zeros(2), np.eye(2))
    phi = HSMap(np.eye(2))
    rng = derive(1, "chars", "validate")
    with pytest.raises(ValueError):
        partition_drift_estimate(driver, phi, rng=None)
    with pytest.raises(ValueError):
        partition_drift_estimate(driver, phi, mc_samples=10, rng=rng)
    with pytest.raises(ValueError):
        partition_drift_estimate(driver, phi, span=(1.0, 1.0), mc_samples=1000, rng=rng)
    skew = Driver.gaussian(np.array([1.0, 0.0]), np.eye(2))
    with pytest.raises(ValueError):
        partition_drift_estimate(skew, phi, mc_samples=1000, rng=rng, strategy="antithetic")
    stable = Driver.canonical_stable(1.5, 2)
    with pytest.raises(ValueError):
        partition_drift_estimate(stable, phi, mc_samples=1000, rng=rng, strategy="mean-cv")
    with pytest.raises(ValueError):
        partition_energy_estimate(stable, phi, mc_samples=1000, rng=rng, strategy="mean-cv")
    with pytest.raises(ValueError):
        partition_energy_estimate(driver, phi, mc_samples=1000, rng=rng, strategy="antithetic")
