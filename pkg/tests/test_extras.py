import itertools
import json
import math

import numpy as np
import pytest

from evident.algebra import bayes_mix, validity_check
from evident.core import bernoulli
from evident.eprocess import lr_process
from evident.errors import EmptyCalibration, NormalizationError
from evident.extras import (
    NonconformityScorer,
    PacBayesInstance,
    argmax_posterior,
    bayes_posterior,
    conformal_e_report,
    conformal_e_value,
    distance_to_bag_mean,
    exhaustive_conformal_check,
    expected_exp_rhs,
    nonconformity_scores,
    pac_bayes_check,
    position_averaged_e_value,
    prior_posterior,
    weights_kl,
)

P0 = bernoulli(0.5)
GRID = tuple(bernoulli(p) for p in np.linspace(0.1, 0.9, 5))
PRIOR = (0.2,) * 5


# ---- conformal


def test_scorer_ignores_bag_order():
    bag = [3.0, 1.0, 2.0, 7.0]
    for perm in itertools.permutations(bag):
        assert distance_to_bag_mean(perm, 5.0) == distance_to_bag_mean(bag, 5.0)


def test_scorer_rejects_negative_scores():
    bad = NonconformityScorer(lambda bag, z: -1.0)
    with pytest.raises(ValueError):
        bad([1.0], 2.0)


def test_identical_examples_give_one():
    rep = conformal_e_report(distance_to_bag_mean, [2.0, 2.0, 2.0], 2.0)
    assert rep.e_value == 1.0
    assert rep.degenerate
    assert json.loads(rep.to_json()) == {"e_value": 1.0, "n": 3, "flag": True}


def test_dominant_test_score_approaches_n_plus_one():
    # a bag-free score, so a far test point does not drag the others up with it
    magnitude = NonconformityScorer(lambda bag, z: abs(z), "magnitude")
    calib = [0.2, 0.1, -0.1, 0.05]
    values = [conformal_e_value(magnitude, calib, far) for far in (10.0, 1e3, 1e6)]
    assert all(b > a for a, b in zip(values, values[1:]))
    assert values[-1] == pytest.approx(len(calib) + 1, rel=1e-4)


def test_e_value_hand_computation():
    # scores against bag means: |0 - 1.5|, |1 - 1|, |2 - 0.5|
    calib, test = [0.0, 1.0], 2.0
    scores = nonconformity_scores(distance_to_bag_mean, calib + [test])
    assert scores == [1.5, 0.0, 1.5]
    assert conformal_e_value(distance_to_bag_mean, calib, test) == pytest.approx(3 * 1.5 / 3.0)


def test_empty_calibration():
    with pytest.raises(EmptyCalibration):
        conformal_e_value(distance_to_bag_mean, [], 1.0)


def test_four_binary_examples_average_to_one():
    for bag in itertools.product((0, 1), repeat=4):
        assert position_averaged_e_value(distance_to_bag_mean, bag) == pytest.approx(1.0, abs=1e-12)


def test_position_average_by_test_slot():
    # average over which of the n+1 slots holds the test point, other order fixed
    bag = [0.0, 1.0, 1.0, 3.0]
    vals = [conformal_e_value(distance_to_bag_mean, bag[:i] + bag[i + 1:], bag[i]) for i in range(4)]
    assert math.fsum(vals) / 4 == pytest.approx(1.0, abs=1e-12)


def test_exhaustive_check_small():
    summary = exhaustive_conformal_check(distance_to_bag_mean, (0, 1), 4)
    assert summary["max_abs_deviation"] <= 1e-12
    assert summary["bags_checked"] == 3 + 4 + 5


def test_vector_examples():
    bag = [(0.0, 0.0), (1.0, 0.0), (0.0, 2.0)]
    assert position_averaged_e_value(distance_to_bag_mean, bag) == pytest.approx(1.0, abs=1e-12)


# ---- PAC-Bayes


def test_weights_kl():
    assert weights_kl((0.5, 0.5), (0.5, 0.5)) == 0.0
    assert weights_kl((1.0, 0.0), (0.5, 0.5)) == pytest.approx(math.log(2))
    assert weights_kl((0.5, 0.5), (1.0, 0.0)) == math.inf


def test_instance_validation():
    with pytest.raises(NormalizationError):
        PacBayesInstance(GRID, (0.5,) * 5, P0, (1, 0))
    with pytest.raises(ValueError):
        PacBayesInstance(GRID[:2], (0.2,) * 5, P0, (1, 0))


def test_prior_posterior_is_jensen_gap():
    inst = PacBayesInstance(GRID, PRIOR, P0, (1, 1, 0, 1, 1, 1, 0, 1, 1, 1))
    rep = pac_bayes_check(inst, prior_posterior(inst))
    lrs = inst.log_ratios()
    assert rep.rhs == pytest.approx(math.fsum(w * v for w, v in zip(PRIOR, lrs)), rel=1e-12)
    assert rep.gap >= 0.0


def test_lhs_is_mixture_evidence():
    path = (1, 1, 0, 1, 0, 1, 1)
    inst = PacBayesInstance(GRID, PRIOR, P0, path)
    mix = bayes_mix(lambda d: lr_process(d, P0), list(zip(GRID, PRIOR))).feed(path)
    assert pac_bayes_check(inst, PRIOR).lhs == pytest.approx(mix.log_evidence, abs=1e-12)


def test_bayes_posterior_attains_equality():
    inst = PacBayesInstance(GRID, PRIOR, P0, (0, 1, 1, 1, 0, 1, 1, 1, 1, 0))
    assert pac_bayes_check(inst, bayes_posterior(inst)).gap == pytest.approx(0.0, abs=1e-12)


def test_argmax_gap_random_paths():
    rng = np.random.default_rng(99)
    for _ in range(100):
        path = tuple(rng.integers(0, 2, size=10).tolist())
        inst = PacBayesInstance(GRID, PRIOR, P0, path)
        assert pac_bayes_check(inst, argmax_posterior(inst)).gap >= -1e-10


def test_null_only_grid():
    inst = PacBayesInstance((P0, P0), (0.5, 0.5), P0, (1, 0, 1))
    rho = (0.9, 0.1)
    rep = pac_bayes_check(inst, rho)
    assert rep.lhs == 0.0
    assert rep.rhs == pytest.approx(-weights_kl(rho, (0.5, 0.5)), rel=1e-14)
    assert rep.rhs <= 0.0
    assert set(json.loads(rep.to_json())) == {"lhs", "rhs", "gap"}


@pytest.mark.parametrize("rule", [prior_posterior, argmax_posterior, bayes_posterior])
def test_expected_exp_rhs_at_most_one(rule):
    for n in range(1, 9):
        assert expected_exp_rhs(GRID, PRIOR, P0, n, rule) <= 1.0 + 1e-10


def test_expected_exp_rhs_bayes_is_exactly_one():
    # equality in the variational bound makes exp(rhs) the mixture evidence itself
    assert expected_exp_rhs(GRID, PRIOR, P0, 6, bayes_posterior) == pytest.approx(1.0, abs=1e-12)


def test_mixture_evidence_passes_validity():
    make = lambda: bayes_mix(lambda d: lr_process(d, P0), list(zip(GRID, PRIOR)))
    assert validity_check(make, P0, 6).passed
