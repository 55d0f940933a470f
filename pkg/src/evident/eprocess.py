"""Evidence-process constructors.

Likelihood ratios against a null kernel, discrete Bayes-factor mixtures,
smoothed prequential plug-ins, the improper maximum-likelihood ratio
(kept as a negative control) and scoring-rule-induced processes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .core import (
    Distribution,
    EvidenceProcess,
    PredictiveKernel,
    as_kernel,
    log_ratio,
    logsumexp,
)
from .errors import AbsoluteContinuityViolation, NormalizationError
from .scoring import ScoringRule, get_rule


class LikelihoodRatioProcess(EvidenceProcess):
    """E_t = prod_s p1(x_s | x^{s-1}) / p0(x_s | x^{s-1})."""

    name = "lr"

    def __init__(self, p1, p0):
        super().__init__()
        self.p1 = as_kernel(p1)
        self.p0 = as_kernel(p0)
        if self.p1.size != self.p0.size:
            raise ValueError("kernels live on different alphabets")

    def _advance(self, x):
        h = self.history
        return self.log_evidence + log_ratio(self.p1(h)[x], self.p0(h)[x])


def lr_process(p1, p0) -> LikelihoodRatioProcess:
    return LikelihoodRatioProcess(p1, p0)


@dataclass(frozen=True)
class DiscretePrior:
    atoms: tuple  # of (Distribution, weight)

    def __post_init__(self):
        atoms = tuple((d, float(w)) for d, w in self.atoms)
        if not atoms:
            raise ValueError("a prior needs at least one atom")
        weights = [w for _, w in atoms]
        if any(w < 0.0 for w in weights):
            raise NormalizationError("prior weights must be nonnegative")
        if abs(math.fsum(weights) - 1.0) > 1e-12:
            raise NormalizationError(f"prior weights sum to {math.fsum(weights)}")
        if len({d.size for d, _ in atoms}) != 1:
            raise ValueError("prior atoms live on different alphabets")
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def point(cls, dist: Distribution) -> "DiscretePrior":
        return cls(((dist, 1.0),))

    @classmethod
    def uniform(cls, dists: Sequence[Distribution]) -> "DiscretePrior":
        return cls(tuple((d, 1.0 / len(dists)) for d in dists))

    @property
    def dists(self) -> list:
        return [d for d, _ in self.atoms]

    @property
    def log_weights(self) -> list:
        return [math.log(w) if w > 0.0 else -math.inf for _, w in self.atoms]

    @property
    def size(self) -> int:
        return self.atoms[0][0].size

    def predictive(self, x_seq) -> float:
        """Prior-predictive probability M(x^n) of an i.i.d. sequence."""
        total = 0.0
        for d, w in self.atoms:
            total += w * math.prod(d[x] for x in x_seq)
        return total


class BayesFactorProcess(EvidenceProcess):
    """BF_t = M1(x^t) / M0(x^t) for discrete i.i.d. mixtures.

    Per-atom log-likelihoods are stored relative to the first null atom,
    so a pair of point priors accumulates exactly the same increments as
    the plain likelihood ratio.
    """

    name = "bf"

    def __init__(self, prior1: DiscretePrior, prior0: DiscretePrior):
        super().__init__()
        if prior1.size != prior0.size:
            raise ValueError("priors live on different alphabets")
        self.prior1 = prior1
        self.prior0 = prior0
        self._ref = prior0.dists[0]
        self._rel1 = [0.0] * len(prior1.atoms)
        self._rel0 = [0.0] * len(prior0.atoms)
        self._logw1 = prior1.log_weights
        self._logw0 = prior0.log_weights

    def _advance(self, x):
        ref = self._ref[x]
        if ref <= 0.0:
            raise AbsoluteContinuityViolation(f"null reference atom gives symbol {x} probability 0")
        for k, d in enumerate(self.prior1.dists):
            self._rel1[k] += log_ratio(d[x], ref)
        for k, d in enumerate(self.prior0.dists):
            self._rel0[k] += log_ratio(d[x], ref)
        log_m1 = logsumexp(w + r for w, r in zip(self._logw1, self._rel1))
        log_m0 = logsumexp(w + r for w, r in zip(self._logw0, self._rel0))
        if log_m0 == -math.inf:
            if log_m1 > -math.inf:
                raise AbsoluteContinuityViolation("alternative mixture positive where null mixture is 0")
            return -math.inf
        return log_m1 - log_m0


def bayes_factor_process(prior1: DiscretePrior, prior0: DiscretePrior) -> BayesFactorProcess:
    return BayesFactorProcess(prior1, prior0)


SMOOTHING = {"kt": 0.5, "laplace": 1.0}


class PrequentialKernel(PredictiveKernel):
    """Additively smoothed Bernoulli plug-in: q(1 | x^{t-1}) = (k + a) / (t - 1 + 2a).

    ``a = 1/2`` is the Krichevsky-Trofimov estimator, ``a = 1`` Laplace's
    rule of succession.
    """

    size = 2

    def __init__(self, smoothing: str | float = "kt"):
        self.a = SMOOTHING[smoothing] if isinstance(smoothing, str) else float(smoothing)
        if self.a <= 0.0:
            raise ValueError("smoothing pseudo-count must be positive")
        self.smoothing = smoothing

    def __call__(self, history):
        k = sum(history)
        q1 = (k + self.a) / (len(history) + 2.0 * self.a)
        return (1.0 - q1, q1)

    def __repr__(self):
        return f"PrequentialKernel({self.smoothing!r})"


def prequential_process(p0, smoothing: str | float = "kt", family: str = "bernoulli") -> LikelihoodRatioProcess:
    if family != "bernoulli":
        raise ValueError(f"unsupported plug-in family {family!r}")
    proc = LikelihoodRatioProcess(PrequentialKernel(smoothing), p0)
    proc.name = f"prequential[{smoothing}]"
    return proc


class MLPluginProcess(EvidenceProcess):
    """max_theta theta^k (1-theta)^(t-k) / P0(x^t), with no normalizer.

    Not an E-process: at t = 1 its expectation under a fair coin is 2.
    Used as the negative control.
    """

    name = "ml_plugin"
    valid = False

    def __init__(self, p0):
        super().__init__()
        self.p0 = as_kernel(p0)
        if self.p0.size != 2:
            raise ValueError("the ML plug-in ratio is defined on a binary alphabet")
        self._ones = 0
        self._log_p0 = 0.0

    def _advance(self, x):
        p0x = self.p0(self.history)[x]
        if p0x <= 0.0:
            raise AbsoluteContinuityViolation(f"null gives symbol {x} probability 0")
        self._log_p0 += math.log(p0x)
        self._ones += x
        t = len(self.history) + 1
        return max_log_likelihood(self._ones, t) - self._log_p0


def max_log_likelihood(k: int, t: int) -> float:
    """log of (k/t)^k ((t-k)/t)^(t-k), with 0^0 = 1."""
    out = 0.0
    if k:
        out += k * math.log(k / t)
    if t - k:
        out += (t - k) * math.log((t - k) / t)
    return out


def ml_plugin_process(p0) -> MLPluginProcess:
    return MLPluginProcess(p0)


class ScoringRuleProcess(EvidenceProcess):
    """Per-step factor exp(S(p0, x) - S(p1, x)) for a scoring rule S."""

    def __init__(self, rule: ScoringRule | str, p1: Distribution, p0: Distribution):
        super().__init__()
        self.rule = get_rule(rule)
        self.p1 = p1
        self.p0 = p0
        self.name = f"score[{self.rule.kind}]"

    def _advance(self, x):
        s0 = self.rule.score(self.p0, x)
        s1 = self.rule.score(self.p1, x)
        if s1 == math.inf:
            return -math.inf
        if s0 == math.inf:
            raise AbsoluteContinuityViolation(f"null gives symbol {x} probability 0")
        return self.log_evidence + (s0 - s1)


def scoring_rule_process(rule, p1: Distribution, p0: Distribution) -> ScoringRuleProcess:
    return ScoringRuleProcess(rule, p1, p0)
