"""Finite-alphabet probability primitives and the evidence-process interface.

Symbols are integer indices ``0 .. size-1``.  Every evidence quantity is
carried as a natural log; ``exp`` is applied only when a caller asks for
the linear-scale value.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import AbsoluteContinuityViolation, NormalizationError

NORMALIZATION_TOL = 1e-12
SUBPROB_TOL = 1e-12

History = tuple


@dataclass(frozen=True)
class Alphabet:
    size: int

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 2:
            raise ValueError(f"alphabet size must be an integer >= 2, got {self.size!r}")

    def symbols(self) -> range:
        return range(self.size)


@dataclass(frozen=True)
class Distribution:
    """Probability vector over a finite alphabet.

    Vectors whose total is within ``1e-12`` of one are renormalized;
    anything further off is rejected.
    """

    probs: tuple

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        if len(probs) < 2:
            raise NormalizationError("a distribution needs at least two symbols")
        if any(not math.isfinite(p) or p < 0.0 for p in probs):
            raise NormalizationError(f"negative or non-finite probability in {probs}")
        total = math.fsum(probs)
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise NormalizationError(f"probabilities sum to {total!r}, not 1")
        if total != 1.0:
            probs = tuple(p / total for p in probs)
        object.__setattr__(self, "probs", probs)

    @property
    def size(self) -> int:
        return len(self.probs)

    @property
    def alphabet(self) -> Alphabet:
        return Alphabet(len(self.probs))

    def __getitem__(self, x: int) -> float:
        return self.probs[x]

    def __len__(self) -> int:
        return len(self.probs)

    def __iter__(self):
        return iter(self.probs)

    def __deepcopy__(self, memo):
        return self

    def support(self) -> tuple:
        return tuple(x for x, p in enumerate(self.probs) if p > 0.0)

    @classmethod
    def point(cls, x: int, size: int = 2) -> "Distribution":
        probs = [0.0] * size
        probs[x] = 1.0
        return cls(tuple(probs))

    @classmethod
    def uniform(cls, size: int) -> "Distribution":
        return cls(tuple([1.0 / size] * size))


def bernoulli(p: float) -> Distribution:
    """Bern(p) on {0, 1}; ``p`` is the probability of symbol 1."""
    if not 0.0 <= p <= 1.0:
        raise NormalizationError(f"Bernoulli parameter {p} outside [0, 1]")
    return Distribution((1.0 - p, p))


# --------------------------------------------------------------------------
# predictive kernels


class PredictiveKernel:
    """One-step conditional sub-probability over a finite alphabet.

    Subclasses implement ``__call__(history) -> tuple of probabilities``.
    The kernel only ever receives the past, which is what makes the
    processes built on top of it adapted.  ``history`` may be a live list
    owned by the caller and must be treated as read-only.
    """

    size: int

    def __call__(self, history: History) -> tuple:
        raise NotImplementedError

    def __deepcopy__(self, memo):
        # kernels are immutable; processes share them across forks
        return self

    def prob(self, history: History, x: int) -> float:
        return self(history)[x]

    def mass(self, history: History) -> float:
        return math.fsum(self(history))

    def check(self, history: History) -> tuple:
        probs = self(history)
        if any(p < 0.0 for p in probs) or math.fsum(probs) > 1.0 + SUBPROB_TOL:
            raise NormalizationError(f"kernel is not a sub-probability at history {history}")
        return probs


class IIDKernel(PredictiveKernel):
    """History-independent kernel returning the same distribution each step."""

    def __init__(self, dist: Distribution):
        self.dist = dist
        self.size = dist.size

    def __call__(self, history: History) -> tuple:
        return self.dist.probs

    def __repr__(self):
        return f"IIDKernel({self.dist.probs})"


class FunctionKernel(PredictiveKernel):
    def __init__(self, fn: Callable[[History], Sequence[float]], size: int):
        self.fn = fn
        self.size = size

    def __call__(self, history: History) -> tuple:
        return tuple(self.fn(tuple(history)))


def as_kernel(obj) -> PredictiveKernel:
    if isinstance(obj, PredictiveKernel):
        return obj
    if isinstance(obj, Distribution):
        return IIDKernel(obj)
    raise TypeError(f"cannot interpret {obj!r} as a predictive kernel")


# --------------------------------------------------------------------------
# divergences and scores


def log_ratio(num: float, den: float) -> float:
    """``log(num/den)`` as a difference of logs, with the zero conventions.

    Raises AbsoluteContinuityViolation when ``den == 0 < num``.  A 0/0
    step is scored as ratio 0: the symbol is impossible under both
    measures, so nothing is gained by observing it.
    """
    if den <= 0.0:
        if num > 0.0:
            raise AbsoluteContinuityViolation(f"numerator {num} > 0 where reference is 0")
        return -math.inf
    if num <= 0.0:
        return -math.inf
    return math.log(num) - math.log(den)


def kl_divergence(p: Distribution, q: Distribution) -> float:
    """KL(p || q) in nats, with 0 log(0/q) = 0."""
    if len(p) != len(q):
        raise ValueError("distributions live on different alphabets")
    terms = []
    for px, qx in zip(p, q):
        if px == 0.0:
            continue
        if qx == 0.0:
            raise AbsoluteContinuityViolation(f"p puts {px} where q is 0")
        terms.append(px * (math.log(px) - math.log(qx)))
    return max(math.fsum(terms), 0.0)


def logsumexp(values) -> float:
    """Stable log(sum(exp(v))) over a short sequence; -inf entries allowed."""
    values = list(values)
    m = max(values)
    if m == -math.inf:
        return -math.inf
    if m == math.inf:
        return math.inf
    return m + math.log(math.fsum(math.exp(v - m) for v in values))


def log_score(p: Distribution, x: int) -> float:
    """-log p(x); ``math.inf`` when the symbol had probability zero."""
    px = p[x]
    if px <= 0.0:
        return math.inf
    return -math.log(px)


def _symbols(path) -> tuple:
    if isinstance(path, SamplePath):
        return path.symbols
    return tuple(path)


def log_likelihood_ratios(p1: Distribution, p0: Distribution, path) -> list:
    """Per-step log(p1(x_t)/p0(x_t)) along a path."""
    table = [None] * len(p0)
    out = []
    for x in _symbols(path):
        if table[x] is None:
            table[x] = log_ratio(p1[x], p0[x])
        out.append(table[x])
    return out


def weight_of_evidence(p1: Distribution, p0: Distribution, path) -> float:
    """Sum of per-step log likelihood ratios, accumulated left to right."""
    total = 0.0
    for term in log_likelihood_ratios(p1, p0, path):
        total += term
    return total


# --------------------------------------------------------------------------
# sample paths


def draw_symbols(dist: Distribution, uniforms: np.ndarray) -> np.ndarray:
    """Inverse-CDF map from uniforms in [0, 1) to symbol indices."""
    cdf = np.cumsum(dist.probs)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, uniforms, side="right").astype(np.int8 if dist.size < 128 else np.int64)


@dataclass(frozen=True)
class SamplePath:
    symbols: tuple
    seed: int
    generator: Distribution

    @classmethod
    def generate(cls, dist: Distribution, length: int, seed: int) -> "SamplePath":
        rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
        symbols = draw_symbols(dist, rng.random(length))
        return cls(tuple(int(s) for s in symbols), int(seed), dist)

    def regenerate(self) -> "SamplePath":
        return SamplePath.generate(self.generator, len(self.symbols), self.seed)

    def __len__(self) -> int:
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)


# --------------------------------------------------------------------------
# evidence processes


class EvidenceProcess:
    """Stateful multiplicative evidence accumulator.

    Subclasses implement ``_advance(x)``, returning the new log evidence
    after observing ``x``; ``self.history`` still holds the past when it
    is called.  ``valid`` tags whether the construction is claimed to be
    an E-process; it is metadata, not a proof.
    """

    name = "process"
    valid = True

    def __init__(self, log_evidence: float = 0.0):
        self.history: list = []
        self.log_evidence = float(log_evidence)
        self.trajectory: list = [self.log_evidence]

    def _advance(self, x: int) -> float:
        raise NotImplementedError

    def step(self, x: int) -> float:
        x = int(x)
        self.log_evidence = self._advance(x)
        self.history.append(x)
        self.trajectory.append(self.log_evidence)
        return self.log_evidence

    def feed(self, symbols: Iterable[int]) -> "EvidenceProcess":
        for x in symbols:
            self.step(x)
        return self

    @property
    def evidence(self) -> float:
        return math.exp(self.log_evidence)

    @property
    def step_count(self) -> int:
        return len(self.history)

    @property
    def sup_log_evidence(self) -> float:
        return max(self.trajectory)

    def fork(self) -> "EvidenceProcess":
        """Independent copy of the current state, for branching enumeration."""
        return copy.deepcopy(self)

    def __repr__(self):
        return f"<{type(self).__name__} {self.name} t={self.step_count} logE={self.log_evidence:.6g}>"
