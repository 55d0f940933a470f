"""Proper scoring rules and the evidence they induce.

Only the log score turns into a martingale under the null.  The Brier
score gives a valid but geometrically decaying process, which is the
contrast this module exists to exhibit.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import Distribution, log_score


def brier(q: Distribution, x: int) -> float:
    """Sum over symbols j of (q(j) - 1{x = j})^2."""
    return math.fsum((qj - (1.0 if j == x else 0.0)) ** 2 for j, qj in enumerate(q))


@dataclass(frozen=True)
class ScoringRule:
    kind: str
    score: Callable[[Distribution, int], float]

    def expected(self, p: Distribution, q: Distribution) -> float:
        """E_{X ~ p}[S(q, X)], skipping symbols p cannot produce."""
        return math.fsum(px * self.score(q, x) for x, px in enumerate(p) if px > 0.0)


LOG = ScoringRule("log", log_score)
BRIER = ScoringRule("brier", brier)
RULES = {"log": LOG, "brier": BRIER}


def get_rule(rule) -> ScoringRule:
    if isinstance(rule, ScoringRule):
        return rule
    try:
        return RULES[rule]
    except KeyError:
        raise ValueError(f"unknown scoring rule {rule!r}; choose from {sorted(RULES)}") from None


def one_step_evidence_expectation(rule, p1: Distribution, p0: Distribution) -> float:
    """E_{p0}[exp(S(p0, X) - S(p1, X))], exactly, by summing over the alphabet."""
    rule = get_rule(rule)
    terms = []
    for x, p0x in enumerate(p0):
        if p0x == 0.0:
            continue
        s1 = rule.score(p1, x)
        if s1 == math.inf:
            continue
        terms.append(p0x * math.exp(rule.score(p0, x) - s1))
    return math.fsum(terms)


def decay_curve(rule, p1: Distribution, p0: Distribution, n_max: int) -> np.ndarray:
    """Expected evidence E_{p0}[E_n] for n = 1..n_max under i.i.d. scoring.

    Independence factorizes the expectation into r**n with r the one-step
    value.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    r = one_step_evidence_expectation(rule, p1, p0)
    return r ** np.arange(1, n_max + 1, dtype=float)


def decay_curve_csv(curve) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["n", "expected_evidence"])
    for n, v in enumerate(curve, start=1):
        writer.writerow([n, repr(float(v))])
    return buf.getvalue()
