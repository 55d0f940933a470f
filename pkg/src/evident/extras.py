"""Conformal e-values and the PAC-Bayes (Donsker-Varadhan) check."""
from __future__ import annotations

import itertools
import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import Distribution, logsumexp
from .errors import EmptyCalibration, NormalizationError


# --------------------------------------------------------------------------
# conformal e-prediction


class NonconformityScorer:
    """Wraps ``fn(bag, example) -> float >= 0``.

    The bag is handed over as a sorted tuple, so the wrapped function
    cannot depend on the order the other examples arrived in.
    """

    def __init__(self, fn: Callable[[tuple, object], float], name: str = "scorer"):
        self.fn = fn
        self.name = name

    def __call__(self, bag: Sequence, example) -> float:
        value = float(self.fn(tuple(sorted(bag)), example))
        if value < 0.0 or math.isnan(value):
            raise ValueError(f"nonconformity score must be nonnegative, got {value}")
        return value


def _distance_to_mean(bag, z):
    if not bag:
        return 0.0
    centre = np.mean(np.asarray(bag, dtype=float), axis=0)
    return float(np.linalg.norm(np.asarray(z, dtype=float) - centre))


distance_to_bag_mean = NonconformityScorer(_distance_to_mean, "distance_to_bag_mean")


@dataclass(frozen=True)
class ConformalEValue:
    e_value: float
    n: int
    degenerate: bool

    def __float__(self):
        return self.e_value

    def to_json(self) -> str:
        return json.dumps({"e_value": self.e_value, "n": self.n, "flag": self.degenerate}, sort_keys=True)


def nonconformity_scores(scorer: NonconformityScorer, examples: Sequence) -> list:
    """Score of each example against the bag of all the others."""
    examples = list(examples)
    return [scorer(examples[:i] + examples[i + 1:], z) for i, z in enumerate(examples)]


def conformal_e_report(scorer: NonconformityScorer, calibration: Sequence, test,
                       degenerate_value: float = 1.0) -> ConformalEValue:
    """(n+1) A_test / sum_i A_i with A_i the score of example i against the rest.

    If every score is zero the examples are indistinguishable to the
    scorer and ``degenerate_value`` is returned with the flag set.
    """
    calibration = list(calibration)
    if not calibration:
        raise EmptyCalibration("at least one calibration example is required")
    scores = nonconformity_scores(scorer, calibration + [test])
    total = math.fsum(scores)
    n = len(calibration)
    if total == 0.0:
        return ConformalEValue(float(degenerate_value), n, True)
    return ConformalEValue((n + 1) * scores[-1] / total, n, False)


def conformal_e_value(scorer: NonconformityScorer, calibration: Sequence, test,
                      degenerate_value: float = 1.0) -> float:
    return conformal_e_report(scorer, calibration, test, degenerate_value).e_value


def position_averaged_e_value(scorer: NonconformityScorer, bag: Sequence) -> float:
    """Average e-value over every ordering of ``bag``, test point last.

    Under exchangeability each ordering is equally likely, so this is the
    expected e-value conditional on the bag.
    """
    bag = list(bag)
    values = [conformal_e_value(scorer, list(perm[:-1]), perm[-1])
              for perm in itertools.permutations(bag)]
    return math.fsum(values) / len(values)


def exhaustive_conformal_check(scorer: NonconformityScorer, labels: Sequence, max_size: int) -> dict:
    """Position-averaged e-value for every multiset of ``labels`` with size 2..max_size."""
    worst = 0.0
    checked = 0
    for size in range(2, max_size + 1):
        for bag in itertools.combinations_with_replacement(labels, size):
            dev = abs(position_averaged_e_value(scorer, bag) - 1.0)
            worst = max(worst, dev)
            checked += 1
    return {"bags_checked": checked, "max_abs_deviation": worst, "max_size": max_size}


# --------------------------------------------------------------------------
# PAC-Bayes via mixture evidence


def _check_weights(weights) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0.0) or abs(math.fsum(w.tolist()) - 1.0) > 1e-12:
        raise NormalizationError(f"weights must be nonnegative and sum to 1: {w}")
    return w


def weights_kl(rho, pi) -> float:
    """KL(rho || pi) between weight vectors; +inf if rho is not dominated by pi."""
    terms = []
    for r, p in zip(rho, pi):
        if r == 0.0:
            continue
        if p == 0.0:
            return math.inf
        terms.append(r * (math.log(r) - math.log(p)))
    return max(math.fsum(terms), 0.0)


@dataclass(frozen=True)
class PacBayesInstance:
    theta_grid: tuple  # of Distribution
    prior: tuple
    null: Distribution
    path: tuple

    def __post_init__(self):
        object.__setattr__(self, "theta_grid", tuple(self.theta_grid))
        object.__setattr__(self, "prior", tuple(float(w) for w in _check_weights(self.prior)))
        object.__setattr__(self, "path", tuple(int(x) for x in self.path))
        if len(self.prior) != len(self.theta_grid):
            raise ValueError("one prior weight per grid point is required")

    def log_ratios(self) -> list:
        """log p_theta(x^n) / p0(x^n) for each grid point."""
        counts = Counter(self.path)
        out = []
        for d in self.theta_grid:
            total = 0.0
            for x, c in sorted(counts.items()):
                if d[x] == 0.0:
                    total = -math.inf
                    break
                total += c * (math.log(d[x]) - math.log(self.null[x]))
            out.append(total)
        return out


@dataclass(frozen=True)
class PacBayesReport:
    lhs: float
    rhs: float

    @property
    def gap(self) -> float:
        if self.rhs == -math.inf:
            return math.inf
        return self.lhs - self.rhs

    def to_json(self) -> str:
        return json.dumps({"lhs": self.lhs, "rhs": self.rhs, "gap": self.gap}, sort_keys=True)


def _dv_rhs(log_ratios, rho, prior) -> float:
    kl = weights_kl(rho, prior)
    if kl == math.inf:
        return -math.inf
    terms = []
    for r, lr in zip(rho, log_ratios):
        if r == 0.0:
            continue
        if lr == -math.inf:
            return -math.inf
        terms.append(r * lr)
    return math.fsum(terms) - kl


def pac_bayes_check(inst: PacBayesInstance, posterior) -> PacBayesReport:
    """Compare log of the prior-mixture evidence with the Donsker-Varadhan lower bound."""
    rho = _check_weights(posterior)
    lrs = inst.log_ratios()
    lhs = logsumexp(math.log(w) + lr if w > 0.0 else -math.inf for w, lr in zip(inst.prior, lrs))
    return PacBayesReport(lhs, _dv_rhs(lrs, rho, inst.prior))


# posterior selection rules: deterministic functions of (instance) -> weights


def prior_posterior(inst: PacBayesInstance) -> tuple:
    return inst.prior


def bayes_posterior(inst: PacBayesInstance) -> tuple:
    """Gibbs/Bayes posterior; attains equality in the variational bound."""
    logs = [math.log(w) + lr if w > 0.0 else -math.inf for w, lr in zip(inst.prior, inst.log_ratios())]
    z = logsumexp(logs)
    return tuple(math.exp(v - z) for v in logs)


def argmax_posterior(inst: PacBayesInstance) -> tuple:
    """Point mass on the grid point with the largest likelihood ratio (first on ties)."""
    lrs = inst.log_ratios()
    best = int(np.argmax(lrs))
    return tuple(1.0 if i == best else 0.0 for i in range(len(lrs)))


def expected_exp_rhs(theta_grid, prior, null: Distribution, n: int,
                     select: Callable[[PacBayesInstance], Sequence[float]]) -> float:
    """E_{p0}[exp(DV lower bound)] by enumerating every path of length ``n``."""
    total = []
    for path in itertools.product(range(null.size), repeat=n):
        p = math.prod(null[x] for x in path)
        if p == 0.0:
            continue
        inst = PacBayesInstance(theta_grid, prior, null, path)
        rhs = _dv_rhs(inst.log_ratios(), select(inst), inst.prior)
        total.append(p * math.exp(rhs))
    return math.fsum(total)
