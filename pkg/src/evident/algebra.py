"""Combinators on evidence processes and a brute-force validity checker.

Mixtures, scaling by c <= 1, predictable stopping and stitching keep a
process inside the evidence class.  The pointwise maximum does not and
is provided only so the checker has something to catch.

Stopping rules are callables ``rule(history, log_trajectory) -> bool``.
They are consulted before the next symbol is revealed, so a rule can
only ever see the past.  Both arguments are the live lists; rules must
not mutate them.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .core import Distribution, EvidenceProcess, as_kernel, bernoulli, logsumexp
from .eprocess import lr_process
from .errors import DepthTooLarge, WeightViolation

StoppingRule = Callable[[tuple, tuple], bool]
ProcessFactory = Callable[[], EvidenceProcess]

WEIGHT_TOL = 1e-12
VALIDITY_TOL = 1e-10
MAX_DEPTH = 12


# --------------------------------------------------------------------------
# stopping rules


def never(history, trajectory) -> bool:
    return False


def at_time(t: int) -> StoppingRule:
    def rule(history, trajectory):
        return len(history) >= t

    rule.__name__ = f"t={t}"
    return rule


def evidence_at_least(b: float) -> StoppingRule:
    log_b = math.log(b)

    def rule(history, trajectory):
        return trajectory[-1] >= log_b

    rule.__name__ = f"e>={b:g}"
    return rule


# --------------------------------------------------------------------------
# combinators


def _check_weights(weights: Sequence[float]) -> list:
    weights = [float(w) for w in weights]
    if any(w < 0.0 or not math.isfinite(w) for w in weights):
        raise WeightViolation(f"mixture weights must be finite and nonnegative: {weights}")
    if math.fsum(weights) > 1.0 + WEIGHT_TOL:
        raise WeightViolation(f"mixture weights sum to {math.fsum(weights)} > 1")
    return weights


class _Shared(EvidenceProcess):
    """Process whose children all read the same symbol stream."""

    def __init__(self, children: Sequence[EvidenceProcess]):
        children = list(children)
        if not children:
            raise ValueError("at least one child process is required")
        if len({c.step_count for c in children}) != 1:
            raise ValueError("children must be aligned on the same filtration")
        self.children = children
        super().__init__(self._combine())
        self.history = list(children[0].history)
        self.trajectory = [self.log_evidence]

    def _combine(self) -> float:
        raise NotImplementedError

    def _advance(self, x):
        for c in self.children:
            c.step(x)
        return self._combine()


class ConvexMix(_Shared):
    """sum_i w_i E^(i)_t; sub-stochastic weights leave the deficit as lost mass."""

    name = "convex_mix"

    def __init__(self, children, weights):
        self.weights = _check_weights(weights)
        if len(self.weights) != len(children):
            raise ValueError("one weight per child is required")
        self._logw = [math.log(w) if w > 0.0 else -math.inf for w in self.weights]
        super().__init__(children)

    def _combine(self):
        return logsumexp(lw + c.log_evidence for lw, c in zip(self._logw, self.children))


def convex_mix(processes: Sequence[EvidenceProcess], weights: Sequence[float]) -> ConvexMix:
    return ConvexMix(processes, weights)


def bayes_mix(make: Callable[[object], EvidenceProcess], prior: Sequence[tuple]) -> ConvexMix:
    """Mixture over a discrete parameter grid: ``prior`` holds (theta, weight) pairs."""
    thetas = [th for th, _ in prior]
    weights = [w for _, w in prior]
    mix = ConvexMix([make(th) for th in thetas], weights)
    mix.name = "bayes_mix"
    return mix


class PointwiseMax(_Shared):
    """max(a_t, b_t).  Not an E-process in general."""

    name = "pointwise_max"
    valid = False

    def _combine(self):
        return max(c.log_evidence for c in self.children)


def pointwise_max(a: EvidenceProcess, b: EvidenceProcess) -> PointwiseMax:
    return PointwiseMax([a, b])


class Scaled(EvidenceProcess):
    name = "scale"

    def __init__(self, child: EvidenceProcess, c: float):
        if not 0.0 < c <= 1.0:
            raise WeightViolation(f"scale factor {c} outside (0, 1]; the evidence class is not a cone")
        self.child = child
        self.c = float(c)
        self._log_c = math.log(c)
        super().__init__(self._log_c + child.log_evidence)
        self.history = list(child.history)

    def _advance(self, x):
        return self._log_c + self.child.step(x)


def scale(process: EvidenceProcess, c: float) -> Scaled:
    return Scaled(process, c)


class Stopped(EvidenceProcess):
    """Evidence frozen from the first time ``rule`` fires."""

    name = "stop"

    def __init__(self, child: EvidenceProcess, rule: StoppingRule):
        super().__init__(child.log_evidence)
        self.child = child
        self.rule = rule
        self.stopped_at = None

    def _advance(self, x):
        if self.stopped_at is None and self.rule(self.history, self.trajectory):
            self.stopped_at = len(self.history)
        if self.stopped_at is not None:
            return self.log_evidence
        return self.child.step(x)


def stop(process: EvidenceProcess, rule: StoppingRule) -> Stopped:
    return Stopped(process, rule)


class Stitched(EvidenceProcess):
    """E^(1)_t up to tau, then E^(1)_tau * E^(2)_{t - tau} with a fresh second process."""

    name = "stitch"

    def __init__(self, first: EvidenceProcess, second: ProcessFactory, rule: StoppingRule):
        super().__init__(first.log_evidence)
        self.first = first
        self.make_second = second
        self.rule = rule
        self.second = None
        self.tau = None
        self._log_at_tau = None

    def _advance(self, x):
        if self.tau is None and self.rule(self.history, self.trajectory):
            self.tau = len(self.history)
            self._log_at_tau = self.log_evidence
            self.second = self.make_second()
        if self.second is None:
            return self.first.step(x)
        return self._log_at_tau + self.second.step(x)


def stitch(first: EvidenceProcess, second: ProcessFactory, rule: StoppingRule) -> Stitched:
    return Stitched(first, second, rule)


def heads_bettor() -> EvidenceProcess:
    """prod_s 2 X_s: all-in on heads against a fair coin."""
    proc = lr_process(Distribution.point(1), bernoulli(0.5))
    proc.name = "bet_heads"
    return proc


def tails_bettor() -> EvidenceProcess:
    proc = lr_process(Distribution.point(0), bernoulli(0.5))
    proc.name = "bet_tails"
    return proc


# --------------------------------------------------------------------------
# validity checking by enumeration


@dataclass
class ValidityReport:
    combinator: str
    depth: int
    max_expectation: float
    worst_history: tuple
    initial_evidence: float
    histories_checked: int
    passed: bool
    tolerance: float = VALIDITY_TOL
    per_history: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "combinator": self.combinator,
            "depth": self.depth,
            "max_expectation": self.max_expectation,
            "worst_history": list(self.worst_history),
            "pass": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def one_step_expectation(process: EvidenceProcess, p0) -> float:
    """E_{p0}[E_{t+1} | past] / E_t for the process's current history.

    Symbols the null cannot produce are skipped.  When the current
    evidence is zero the ratio is 0 if every reachable child stays at
    zero and +inf otherwise.
    """
    p0 = as_kernel(p0)
    h = tuple(process.history)
    base = process.log_evidence
    terms = []
    for x, px in enumerate(p0(h)):
        if px <= 0.0:
            continue
        child = process.fork()
        child.step(x)
        if base == -math.inf:
            if child.log_evidence > -math.inf:
                return math.inf
            continue
        terms.append(px * math.exp(child.log_evidence - base))
    return math.fsum(terms)


def validity_check(make: ProcessFactory, p0, depth: int, *, keep_all: bool = False) -> ValidityReport:
    """Certify the supermartingale property on every reachable history shorter than ``depth``.

    ``make`` builds a fresh process.  The check passes when E_0 <= 1 and
    the one-step conditional expectation ratio never exceeds 1 + 1e-10.
    """
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    if depth > MAX_DEPTH:
        raise DepthTooLarge(f"depth {depth} exceeds the enumeration limit {MAX_DEPTH}")
    p0 = as_kernel(p0)
    root = make()
    initial = root.evidence
    worst = -math.inf
    worst_h: tuple = ()
    seen = 0
    per_history = {}

    # explicit stack, children pushed in reverse so visiting is lexicographic
    stack = [root]
    while stack:
        proc = stack.pop()
        h = tuple(proc.history)
        if len(h) >= depth:
            continue
        probs = p0(h)
        base = proc.log_evidence
        terms = []
        blowup = False
        children = []
        for x, px in enumerate(probs):
            if px <= 0.0:
                continue
            child = proc.fork()
            child.step(x)
            children.append(child)
            if base == -math.inf:
                blowup = blowup or child.log_evidence > -math.inf
            else:
                terms.append(px * math.exp(child.log_evidence - base))
        value = math.inf if blowup else math.fsum(terms)
        seen += 1
        if keep_all:
            per_history[h] = value
        if value > worst:
            worst, worst_h = value, h
        stack.extend(reversed(children))

    passed = initial <= 1.0 + VALIDITY_TOL and (seen == 0 or worst <= 1.0 + VALIDITY_TOL)
    return ValidityReport(
        combinator=root.name,
        depth=depth,
        max_expectation=worst if seen else 0.0,
        worst_history=worst_h,
        initial_evidence=initial,
        histories_checked=seen,
        passed=passed,
        per_history=per_history,
    )
