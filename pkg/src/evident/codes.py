"""Exact Bernoulli NML, horizon-dependent conditionals and sequential liftability.

NML quantities are computed in exact rationals (``fractions.Fraction``)
and converted to floats only when reported.  A sequence with ``k`` ones
out of ``n`` has NML probability ``(k/n)^k ((n-k)/n)^(n-k) / C_n``; since
that depends on the sequence only through ``k``, marginals over
completions collapse to sums over counts.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb
from typing import Callable

from .core import EvidenceProcess, as_kernel
from .errors import BudgetExceeded, MissingPrefix

NORMALIZER_BUDGET = 30
HORIZON_BUDGET = 16
LIFT_TOL = 1e-10


def _max_likelihood(k: int, n: int) -> Fraction:
    # Fraction(0) ** 0 == 1, which is the 0^0 = 1 convention
    return Fraction(k, n) ** k * Fraction(n - k, n) ** (n - k)


@lru_cache(maxsize=None)
def nml_normalizer(n: int) -> Fraction:
    """Shtarkov sum C_n = sum_k binom(n, k) (k/n)^k ((n-k)/n)^(n-k)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if n > NORMALIZER_BUDGET:
        raise BudgetExceeded(f"n = {n} exceeds the exact budget {NORMALIZER_BUDGET}")
    return sum((comb(n, k) * _max_likelihood(k, n) for k in range(n + 1)), Fraction(0))


def nml_probability(x_seq) -> Fraction:
    """P_NML^(n)(x^n) with n = len(x_seq); the empty sequence has probability 1."""
    n = len(x_seq)
    if n == 0:
        return Fraction(1)
    return _max_likelihood(sum(x_seq), n) / nml_normalizer(n)


def nml_marginal(horizon: int, prefix) -> Fraction:
    """Sum of P_NML^(horizon) over every completion of ``prefix``."""
    m, k = len(prefix), sum(prefix)
    if m > horizon:
        raise ValueError("prefix longer than the horizon")
    c = nml_normalizer(horizon)
    rest = horizon - m
    return sum(
        (comb(rest, j) * _max_likelihood(k + j, horizon) for j in range(rest + 1)),
        Fraction(0),
    ) / c


def nml_horizon_conditional_exact(N: int, t: int, history, x: int) -> Fraction:
    if N > HORIZON_BUDGET:
        raise BudgetExceeded(f"horizon {N} exceeds the enumeration budget {HORIZON_BUDGET}")
    if not 1 <= t <= N:
        raise ValueError(f"need 1 <= t <= N, got t={t}, N={N}")
    history = tuple(history)
    if len(history) != t - 1:
        raise ValueError(f"history must have length t - 1 = {t - 1}")
    return nml_marginal(N, history + (x,)) / nml_marginal(N, history)


def nml_horizon_conditional(N: int, t: int, history, x: int) -> float:
    """q_t^(N)(x | history) obtained by marginalizing the horizon-N NML code."""
    return float(nml_horizon_conditional_exact(N, t, history, x))


# --------------------------------------------------------------------------
# code-length families


@dataclass
class CodeLengthFamily:
    """Code lengths (nats) for every prefix up to ``max_depth``.

    When the family comes from exact rational probabilities those are kept
    in ``exact`` so that liftability masses can be reported exactly.
    """

    lengths: dict
    max_depth: int
    alphabet_size: int = 2
    name: str = "code"
    exact: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.lengths.setdefault((), 0.0)

    def length(self, prefix) -> float:
        try:
            return self.lengths[tuple(prefix)]
        except KeyError:
            raise MissingPrefix(tuple(prefix)) from None

    def prefixes(self, depth: int):
        for n in range(depth + 1):
            yield from itertools.product(range(self.alphabet_size), repeat=n)

    @classmethod
    def from_measure(cls, prob: Callable, depth: int, alphabet_size: int = 2, name: str = "measure"):
        """l(x^n) = -log Q(x^n) for a prefix measure ``prob``.

        ``prob`` may return a Fraction, in which case the exact values are
        retained alongside the float lengths.
        """
        lengths, exact = {}, {}
        for n in range(depth + 1):
            for h in itertools.product(range(alphabet_size), repeat=n):
                q = prob(h)
                if isinstance(q, Fraction):
                    exact[h] = q
                lengths[h] = -math.log(q) if q > 0 else math.inf
        if lengths[()] != 0.0:
            raise ValueError("a prefix measure must give the empty prefix probability 1")
        return cls(lengths, depth, alphabet_size, name, exact)

    @classmethod
    def nml_sequence(cls, depth: int) -> "CodeLengthFamily":
        """Horizon-t NML code at every t: l(x^t) = -log P_NML^(t)(x^t)."""
        return cls.from_measure(nml_probability, depth, 2, "nml_sequence")

    @classmethod
    def prequential(cls, depth: int, smoothing: str = "kt") -> "CodeLengthFamily":
        a = {"kt": Fraction(1, 2), "laplace": Fraction(1)}[smoothing]

        def prob(h):
            out, k = Fraction(1), 0
            for t, x in enumerate(h):
                q1 = (k + a) / (t + 2 * a)
                out *= q1 if x == 1 else 1 - q1
                k += x
            return out

        return cls.from_measure(prob, depth, 2, f"prequential[{smoothing}]")


@dataclass
class LiftabilityReport:
    depth: int
    passed: bool
    violations: list  # of (prefix, mass)
    max_mass: float
    masses: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        out = []
        for prefix, mass in self.violations:
            frac = mass if isinstance(mass, Fraction) else Fraction(mass)
            out.append({
                "prefix": list(prefix),
                "mass_numerator": frac.numerator,
                "mass_denominator": frac.denominator,
            })
        return {"depth": self.depth, "pass": self.passed, "violations": out}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def liftability_check(family: CodeLengthFamily, depth: int) -> LiftabilityReport:
    """Check sum_x exp(-l(hx) + l(h)) <= 1 on every prefix shorter than ``depth``."""
    masses = {}
    violations = []
    for h in family.prefixes(depth - 1):
        children = [h + (x,) for x in range(family.alphabet_size)]
        if h in family.exact and all(c in family.exact for c in children):
            denom = family.exact[h]
            if denom == 0:
                continue
            mass = sum((family.exact[c] for c in children), Fraction(0)) / denom
            exceeds = mass > 1
        else:
            base = family.length(h)
            if base == math.inf:
                continue
            mass = math.fsum(math.exp(base - family.length(c)) for c in children)
            exceeds = mass > 1.0 + LIFT_TOL
        masses[h] = mass
        if exceeds:
            violations.append((h, mass))
    max_mass = max((float(m) for m in masses.values()), default=0.0)
    return LiftabilityReport(depth, not violations, violations, max_mass, masses)


class CodeEvidenceProcess(EvidenceProcess):
    """E_t = exp(-l(x^t)) / P0(x^t).  Validity is not assumed."""

    valid = False

    def __init__(self, family: CodeLengthFamily, p0):
        self.family = family
        self.p0 = as_kernel(p0)
        super().__init__(-family.length(()))
        self.name = f"code[{family.name}]"
        self._log_p0 = 0.0

    def _advance(self, x):
        h = tuple(self.history)
        p0x = self.p0(h)[x]
        self._log_p0 += math.log(p0x) if p0x > 0.0 else -math.inf
        return -self.family.length(h + (x,)) - self._log_p0


def code_to_e(family: CodeLengthFamily, p0) -> CodeEvidenceProcess:
    return CodeEvidenceProcess(family, p0)
