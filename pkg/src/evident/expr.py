"""A small expression language for building evidence processes from the shell.

Grammar (numbers are Bernoulli parameters unless noted)::

    expr  := lr(p1, p0) | kt(p0) | laplace(p0) | ml(p0)
           | brier(p1, p0) | logscore(p1, p0)
           | bf([p, p, ...], p0)          uniform prior over alternatives
           | nml(p0)                      horizon-t NML code against p0
           | bet_heads | bet_tails
           | mix(w: expr, w: expr, ...)
           | scale(c, expr)
           | max(expr, expr)
           | stop(expr @ rule)
           | stitch(expr @ rule -> expr)
    rule  := t=N | e>=B | never

Example: ``stitch(lr(0.65,0.5) @ t=1 -> lr(0.3,0.5))``.
"""
from __future__ import annotations

import re
from typing import Callable

from . import algebra
from .codes import CodeLengthFamily, code_to_e
from .core import EvidenceProcess, bernoulli
from .eprocess import (
    DiscretePrior,
    bayes_factor_process,
    lr_process,
    ml_plugin_process,
    prequential_process,
    scoring_rule_process,
)

Factory = Callable[[], EvidenceProcess]

_TOKEN = re.compile(r"\s*(?:(>=|->|[(),:@\[\]=])|([A-Za-z_][A-Za-z_0-9]*)|([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?))")


class ExprError(ValueError):
    pass


def tokenize(text: str) -> list:
    pos, out = 0, []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ExprError(f"unexpected input at {text[pos:]!r}")
        punct, name, num = m.groups()
        if punct:
            out.append(("p", punct))
        elif name:
            out.append(("n", name))
        else:
            out.append(("f", float(num)))
        pos = m.end()
    return out


class _Parser:
    def __init__(self, text: str, horizon: int):
        self.toks = tokenize(text)
        self.i = 0
        self.horizon = horizon

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def take(self, kind=None, value=None):
        tok = self.peek()
        if tok[0] is None or (kind and tok[0] != kind) or (value is not None and tok[1] != value):
            want = value if value is not None else kind
            raise ExprError(f"expected {want!r}, found {tok[1]!r}")
        self.i += 1
        return tok[1]

    def number(self) -> float:
        return self.take("f")

    def parse(self) -> Factory:
        f = self.expr()
        if self.peek()[0] is not None:
            raise ExprError(f"trailing input starting at {self.peek()[1]!r}")
        return f

    def rule(self):
        name = self.take("n")
        if name == "never":
            return algebra.never
        if name == "t":
            self.take("p", "=")
            return algebra.at_time(int(self.number()))
        if name == "e":
            self.take("p", ">=")
            return algebra.evidence_at_least(self.number())
        raise ExprError(f"unknown stopping rule {name!r}")

    def expr(self) -> Factory:
        name = self.take("n")
        if name in ("bet_heads", "bet_tails"):
            return algebra.heads_bettor if name == "bet_heads" else algebra.tails_bettor
        self.take("p", "(")
        f = getattr(self, f"_{name}", None)
        if f is None:
            raise ExprError(f"unknown constructor {name!r}")
        out = f()
        self.take("p", ")")
        return out

    def _pair(self):
        a = self.number()
        self.take("p", ",")
        return a, self.number()

    def _lr(self):
        p1, p0 = self._pair()
        return lambda: lr_process(bernoulli(p1), bernoulli(p0))

    def _kt(self):
        p0 = self.number()
        return lambda: prequential_process(bernoulli(p0), "kt")

    def _laplace(self):
        p0 = self.number()
        return lambda: prequential_process(bernoulli(p0), "laplace")

    def _ml(self):
        p0 = self.number()
        return lambda: ml_plugin_process(bernoulli(p0))

    def _brier(self):
        p1, p0 = self._pair()
        return lambda: scoring_rule_process("brier", bernoulli(p1), bernoulli(p0))

    def _logscore(self):
        p1, p0 = self._pair()
        return lambda: scoring_rule_process("log", bernoulli(p1), bernoulli(p0))

    def _bf(self):
        self.take("p", "[")
        alts = [self.number()]
        while self.peek() == ("p", ","):
            self.take("p", ",")
            alts.append(self.number())
        self.take("p", "]")
        self.take("p", ",")
        p0 = self.number()
        prior1 = DiscretePrior.uniform([bernoulli(a) for a in alts])
        prior0 = DiscretePrior.point(bernoulli(p0))
        return lambda: bayes_factor_process(prior1, prior0)

    def _nml(self):
        p0 = self.number()
        family = CodeLengthFamily.nml_sequence(self.horizon)
        return lambda: code_to_e(family, bernoulli(p0))

    def _mix(self):
        parts = []
        while True:
            w = self.number()
            self.take("p", ":")
            parts.append((w, self.expr()))
            if self.peek() != ("p", ","):
                break
            self.take("p", ",")
        return lambda: algebra.convex_mix([f() for _, f in parts], [w for w, _ in parts])

    def _scale(self):
        c = self.number()
        self.take("p", ",")
        inner = self.expr()
        return lambda: algebra.scale(inner(), c)

    def _max(self):
        a = self.expr()
        self.take("p", ",")
        b = self.expr()
        return lambda: algebra.pointwise_max(a(), b())

    def _stop(self):
        inner = self.expr()
        self.take("p", "@")
        rule = self.rule()
        return lambda: algebra.stop(inner(), rule)

    def _stitch(self):
        first = self.expr()
        self.take("p", "@")
        rule = self.rule()
        self.take("p", "->")
        second = self.expr()
        return lambda: algebra.stitch(first(), second, rule)


def parse_process(text: str, horizon: int = 12) -> Factory:
    """Parse ``text`` into a zero-argument factory of fresh processes.

    ``horizon`` bounds the prefix depth of code-length families.
    """
    return _Parser(text, horizon).parse()
