"""Seeded Monte Carlo experiments.

Every experiment draws its paths block by block from
``RngStream(seed, block_index)``, so a result depends only on
``(seed, reps, parameters)``.  Rates carry binomial standard errors and
means carry sd/sqrt(n).
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import xlogy

from .boundary import _mean_sd, increment_table, simulate_stopping_grid
from .core import Distribution, EvidenceProcess, bernoulli, draw_symbols
from .rng import RngStream, run_blocks  # noqa: F401  (RngStream re-exported)

TABLE2_THRESHOLDS = (10, 20, 50, 100, 200)
TABLE2_CAP = 2000
REPS_TIERS = {"smoke": 20_000, "full": 200_000}
MAX_STORED_PATHS = 100


@dataclass
class ExperimentResult:
    name: str
    metrics: dict
    mc_stderr: dict
    reps: int
    seed: int
    params: dict = field(default_factory=dict)
    trajectories: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "metrics": self.metrics,
            "mc_stderr": self.mc_stderr,
            "reps": self.reps,
            "seed": self.seed,
            "params": self.params,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def trajectories_csv(self, arm: str | None = None) -> str:
        """Long-format (path_id, t, log_evidence) rows for one stored arm."""
        if arm is None:
            arm = next(iter(self.trajectories))
        paths = self.trajectories[arm]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["path_id", "t", "log_evidence"])
        for i, row in enumerate(paths):
            for t, v in enumerate(row.tolist()):
                writer.writerow([i, t, repr(v)])
        return buf.getvalue()


def _rate(hits: np.ndarray) -> tuple:
    n = hits.size
    p = float(hits.sum()) / n
    return p, math.sqrt(p * (1.0 - p) / n)


def _median_with_stderr(values: np.ndarray) -> tuple:
    """Sample median and a distribution-free standard error.

    The error is half the spread between the order statistics at
    n/2 -/+ sqrt(n)/2, the binomial one-sigma band for the median.
    """
    x = np.sort(values)
    n = x.size
    med = float(np.median(x))
    half = math.sqrt(n) / 2.0
    lo = x[max(int(math.floor(n / 2 - half)), 0)]
    hi = x[min(int(math.ceil(n / 2 + half)), n - 1)]
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return med, math.inf
    return med, float(hi - lo) / 2.0


def simulate_symbols(dist: Distribution, reps: int, T: int, seed: int, threads: int | None = None) -> np.ndarray:
    """(reps, T) matrix of i.i.d. symbols, drawn block-wise from the seeded streams."""
    parts = run_blocks(lambda gen, n: draw_symbols(dist, gen.random((n, T))), reps, seed, threads)
    return np.concatenate(parts) if parts else np.zeros((0, T), dtype=np.int8)


def lr_log_paths(symbols: np.ndarray, p1: Distribution, p0: Distribution) -> np.ndarray:
    """log E_t for t = 0..T of the i.i.d. likelihood ratio on each row."""
    inc = increment_table(p1, p0, Distribution.uniform(len(p0)))
    out = np.zeros((symbols.shape[0], symbols.shape[1] + 1))
    np.cumsum(inc[symbols], axis=1, out=out[:, 1:])
    return out


def ml_log_paths(symbols: np.ndarray, p0: Distribution) -> np.ndarray:
    """log of max_theta P_theta(x^t) / P0(x^t) on binary rows, t = 0..T."""
    k = np.cumsum(symbols, axis=1, dtype=np.int64)
    t = np.arange(1, symbols.shape[1] + 1)
    log_ml = xlogy(k, k / t) + xlogy(t - k, (t - k) / t)
    log_p0 = np.cumsum(np.log(np.asarray(p0.probs))[symbols], axis=1)
    out = np.zeros((symbols.shape[0], symbols.shape[1] + 1))
    out[:, 1:] = log_ml - log_p0
    return out


def first_crossing(log_paths: np.ndarray, log_b: float) -> tuple:
    """(tau, crossed) for the first t >= 1 with log E_t >= log b."""
    hit = log_paths[:, 1:] >= log_b
    crossed = hit.any(axis=1)
    tau = np.where(crossed, hit.argmax(axis=1) + 1, log_paths.shape[1] - 1)
    return tau, crossed


def _stored(paths: np.ndarray) -> np.ndarray:
    return paths[:MAX_STORED_PATHS].copy()


def experiment_accumulation(seed: int = 42, reps: int = 500, T: int = 200, b: float = 20.0,
                            p1: float = 0.65, p0: float = 0.5, threads: int | None = None) -> ExperimentResult:
    """LR evidence under the alternative: crossing fraction, median crossing time, growth slope."""
    d1, d0 = bernoulli(p1), bernoulli(p0)
    sym = simulate_symbols(d1, reps, T, seed, threads)
    lr = lr_log_paths(sym, d1, d0)
    ml = ml_log_paths(sym, d0)
    tau, crossed = first_crossing(lr, math.log(b))
    frac, frac_se = _rate(crossed)
    # uncrossed paths are right-censored at T; treat them as later than every crossing
    med, med_se = _median_with_stderr(np.where(crossed, tau, np.inf).astype(float))
    slope, slope_sd = _mean_sd(lr[:, -1] / T)
    bias, bias_sd = _mean_sd(ml[:, -1] - lr[:, -1])
    n = sym.shape[0]
    return ExperimentResult(
        name="accumulation",
        metrics={
            "crossing_fraction": frac,
            "median_tau": med,
            "slope": slope,
            "ml_minus_lr_at_T": bias,
        },
        mc_stderr={
            "crossing_fraction": frac_se,
            "median_tau": med_se,
            "slope": slope_sd / math.sqrt(n),
            "ml_minus_lr_at_T": bias_sd / math.sqrt(n),
        },
        reps=reps,
        seed=seed,
        params={"T": T, "b": b, "p1": p1, "p0": p0, "p_data": p1},
        trajectories={"lr": _stored(lr), "ml": _stored(ml)},
    )


def experiment_type1(seed: int = 42, reps: int = 10_000, T: int = 500, b: float = 20.0,
                     p1: float = 0.65, p0: float = 0.5, threads: int | None = None) -> ExperimentResult:
    """False-rejection rates under the null with stop-at-first-crossing monitoring."""
    d1, d0 = bernoulli(p1), bernoulli(p0)
    sym = simulate_symbols(d0, reps, T, seed, threads)
    log_b = math.log(b)
    _, lr_hit = first_crossing(lr_log_paths(sym, d1, d0), log_b)
    _, ml_hit = first_crossing(ml_log_paths(sym, d0), log_b)
    lr_rate, lr_se = _rate(lr_hit)
    ml_rate, ml_se = _rate(ml_hit)
    return ExperimentResult(
        name="type1",
        metrics={"lr_rate": lr_rate, "ml_rate": ml_rate, "ville_bound": 1.0 / b},
        mc_stderr={"lr_rate": lr_se, "ml_rate": ml_se, "ville_bound": 0.0},
        reps=reps,
        seed=seed,
        params={"T": T, "b": b, "p1": p1, "p0": p0, "p_data": p0},
    )


def experiment_misspec(seed: int = 42, reps: int = 500, T: int = 300, b: float = 20.0,
                       p_true: float = 0.55, p1: float = 0.80, p0: float = 0.5,
                       threads: int | None = None) -> ExperimentResult:
    """LR evidence with a badly chosen alternative: drift per observation and crossing count."""
    dt, d1, d0 = bernoulli(p_true), bernoulli(p1), bernoulli(p0)
    sym = simulate_symbols(dt, reps, T, seed, threads)
    lr = lr_log_paths(sym, d1, d0)
    _, crossed = first_crossing(lr, math.log(b))
    drift, drift_sd = _mean_sd(lr[:, -1] / T)
    rate, rate_se = _rate(crossed)
    terminal, terminal_se = _rate(lr[:, -1] >= math.log(b))
    n = sym.shape[0]
    return ExperimentResult(
        name="misspec",
        metrics={
            "drift": drift,
            "crossings": float(crossed.sum()),
            "crossing_rate": rate,
            "terminal_above_threshold": terminal,
        },
        mc_stderr={
            "drift": drift_sd / math.sqrt(n),
            "crossings": rate_se * n,
            "crossing_rate": rate_se,
            "terminal_above_threshold": terminal_se,
        },
        reps=reps,
        seed=seed,
        params={"T": T, "b": b, "p_true": p_true, "p1": p1, "p0": p0},
        trajectories={"lr": _stored(lr)},
    )


def verify_table2(seed: int = 42, reps: int = REPS_TIERS["full"], thresholds=TABLE2_THRESHOLDS,
                  threads: int | None = None) -> list:
    """Crossing-time table for Bern(0.65) against Bern(0.5); one report per threshold."""
    d1, d0 = bernoulli(0.65), bernoulli(0.5)
    return simulate_stopping_grid(d1, d1, d0, thresholds, TABLE2_CAP, reps, seed, threads)


def ville_frequency(make: Callable[[], EvidenceProcess], null: Distribution, thresholds, reps: int,
                    T: int, seed: int, threads: int | None = None) -> dict:
    """Fraction of null paths whose running evidence ever reaches each threshold.

    Drives real process objects step by step; a path is abandoned once
    it has reached the largest threshold, since every smaller one is then
    reached too.  Returns ``{b: (frequency, binomial_stderr)}``.
    """
    thresholds = sorted(thresholds)
    log_top = math.log(thresholds[-1])
    sym = simulate_symbols(null, reps, T, seed, threads)
    sup = np.empty(reps)
    for i, row in enumerate(sym.tolist()):
        proc = make()
        best = proc.log_evidence
        for x in row:
            v = proc.step(x)
            if v > best:
                best = v
                if best >= log_top:
                    break
        sup[i] = best
    return {b: _rate(sup >= math.log(b)) for b in thresholds}
