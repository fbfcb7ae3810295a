"""Acceptance battery: every primary verification at default budgets.

Each test runs one full verification against the default configuration
(dimension 8, fixed seed) and prints a single pass/fail line with the
realized margin.  The final test is an exhaustive small-case oracle that
needs no battery: the law of a two-interval predictable integral against a
two-atom counted-jump driver, compared outcome-by-outcome with exact
enumeration.
"""

import collections

import numpy as np

from cyllevy.characteristics import CylCharacteristics
from cyllevy.checks import ANCHORS, check_anchor, check_ids, run_check
from cyllevy.config import ExperimentConfig
from cyllevy.driver import Driver
from cyllevy.integrate import (
    CountAbove,
    Otherwise,
    PredictableStepProcess,
    enumerate_cp_law,
    integrate_step_pred,
)
from cyllevy.linalg import HSMap, Partition
from cyllevy.measures import AtomicJumps
from cyllevy.rng import derive

CFG = ExperimentConfig(seed=20260822)


def _run(number, title, name):
    res, _rows = run_check(name, CFG)
    ok = res.status == "pass"
    print(f"acceptance {number:02d} {title}: {'PASS' if ok else 'FAIL'} (margin {res.margin:.3g})")
    assert ok, f"{name} reported {res.status} with margin {res.margin}"
    return res


def test_acceptance_01_partition_characteristics():
    res = _run(1, "partition characteristic estimates converge", "limit-characteristics")
    assert res.values["n_cases"] == 18  # three driver kinds, three maps, two estimators
    assert res.values["n_passed"] == 18


def test_acceptance_02_pushforward_consistency():
    res = _run(2, "pushforward laws match the mapped symbol", "pushforward-consistency")
    assert res.values["n_kinds"] == 5
    assert res.values["worst_error_over_gate"] <= 1.0


def test_acceptance_03_contraction_composition():
    res = _run(3, "contraction composition of the truncated drift", "contraction-composition")
    assert res.values["hand_case_error"] < 1e-10
    assert res.values["n_contractions"] == 20


def test_acceptance_04_modular_growth():
    res = _run(4, "four-constant growth bound of the modular", "modular-growth")
    assert res.values["n_pairs_total"] == 1000  # 200 pairs for each driver kind
    assert res.values["violations"] == 0


def test_acceptance_05_metrization_sandwich():
    res = _run(5, "cube-root modular metrization sandwich", "metrization-sandwich")
    assert res.values["n_sets"] == 20
    assert res.values["n_passed"] == 20
    assert abs(res.tolerances["exponent"] - 1.0 / 3.0) < 1e-12


def test_acceptance_06_stable_equivalence():
    res = _run(6, "two-sided stable energy equivalence", "stable-equivalence")
    assert res.values["max_width_drift"] < 0.10


def test_acceptance_07_integration_equivalence():
    res = _run(7, "modular and Ky Fan convergence agree", "integration-equivalence")
    assert res.values["spearman"] > 0.9
    res_p = _run(7, "predictable variant of the same equivalence", "predictable-equivalence")
    assert res_p.values["spearman"] > 0.9


def test_acceptance_08_tangent_laws():
    res = _run(8, "tangent integrals reproduce conditional laws", "tangent-laws")
    assert res.values["ks_p_value"] > 0.01
    assert res.values["stratified_error_over_gate"] <= 1.0


def test_acceptance_09_decoupling_ratios():
    res = _run(9, "decoupling ratios are unit-forward and reproducible", "decoupling-ratio")
    assert res.tolerances["reseed_drift"] == 0.10


def test_acceptance_10_dominated_convergence():
    res = _run(10, "dominated dampened truncations converge", "dominated-convergence")
    assert res.values["max_final"] < 1e-2


def test_acceptance_11_semimartingale_bound():
    res = _run(11, "integral family bounded in probability", "semimartingale-bound")
    assert res.values["max_change"] < 0.05


def test_acceptance_12_exhaustive_small_case_oracle():
    # two atoms, every coordinate outside the truncation box, so the counted
    # process carries no compensator drift and the law enumerates exactly
    atoms = np.array([[1.5, -2.0], [-1.2, 3.0]])
    rates = np.array([0.8, 1.1])
    chars = CylCharacteristics(np.zeros(2), np.zeros((2, 2)), AtomicJumps(atoms, rates))
    driver = Driver(chars, "compound-poisson")

    rng = derive(20260822, "acceptance", "small-case")
    f1 = HSMap(np.array([[0.6, -0.1], [0.2, 0.5]]))
    f_low = HSMap(np.array([[1.0, 0.0], [0.0, -0.7]]))
    f_high = HSMap(np.array([[-0.3, 0.4], [0.8, 0.1]]))
    proc = PredictableStepProcess(
        Partition.regular(2),
        (f1, ((CountAbove(0.5), f_high), (Otherwise(), f_low))),
    )

    outcomes, probs = enumerate_cp_law(proc, driver)
    assert probs.sum() > 1.0 - 1e-8

    n = 10**5
    law = integrate_step_pred(proc, driver, n, rng)

    def key(row):
        return tuple(np.round(row, 6))

    counts = collections.Counter(key(row) for row in law.samples)
    exact = {key(row): p for row, p in zip(outcomes, probs)}
    support = set(counts) | set(exact)
    tv = 0.5 * sum(abs(counts.get(k, 0) / n - exact.get(k, 0.0)) for k in support)
    ok = tv < 0.02
    print(f"acceptance 12 exhaustive small-case law oracle: {'PASS' if ok else 'FAIL'} (tv {tv:.4f})")
    assert ok


def test_every_check_names_its_statement():
    ids = check_ids()
    assert len(ids) == 13
    assert set(ANCHORS) == set(ids)
    for cid in ids:
        assert isinstance(check_anchor(cid), str) and check_anchor(cid)
