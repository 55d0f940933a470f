"""Threshold crossing for the log-likelihood-ratio random walk.

Under i.i.d. data the log evidence S_t is a random walk whose increments
take one value per symbol, so crossing times are simulated in bulk with
numpy: each replication block draws a (rows x chunk) matrix of uniforms,
maps them to symbols, and scans the cumulative sums for the first index
at or above each threshold.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .core import Distribution, draw_symbols, kl_divergence, log_ratio
from .errors import AbsoluteContinuityViolation, DomainError
from .rng import run_blocks

CHUNK = 256


@dataclass(frozen=True)
class CrossingConfig:
    threshold_b: float
    horizon_cap: int

    def __post_init__(self):
        if not self.threshold_b > 1.0:
            raise DomainError(f"threshold b must exceed 1, got {self.threshold_b}")
        if int(self.horizon_cap) != self.horizon_cap or self.horizon_cap < 1:
            raise DomainError(f"horizon cap must be a positive integer, got {self.horizon_cap}")

    @property
    def log_b(self) -> float:
        return math.log(self.threshold_b)


@dataclass(frozen=True)
class IncrementMoments:
    mu: float
    sigma2: float

    @property
    def second_moment(self) -> float:
        return self.sigma2 + self.mu * self.mu


def increment_table(p1: Distribution, p0: Distribution, data: Distribution | None = None) -> np.ndarray:
    """log(p1(x)/p0(x)) for every symbol ``data`` can produce (others get nan)."""
    data = p1 if data is None else data
    out = np.full(len(p0), np.nan)
    for x, px in enumerate(data):
        if px > 0.0:
            out[x] = log_ratio(p1[x], p0[x])
    return out


def increment_moments(p1: Distribution, p0: Distribution, data: Distribution | None = None) -> IncrementMoments:
    """Mean and variance of Y = log(p1/p0)(X), X ~ ``data`` (default p1), by exact summation."""
    data = p1 if data is None else data
    ys = increment_table(p1, p0, data)
    support = [(px, ys[x]) for x, px in enumerate(data) if px > 0.0]
    if any(not math.isfinite(y) for _, y in support):
        raise AbsoluteContinuityViolation("log-likelihood increment is infinite on the data support")
    mu = math.fsum(px * y for px, y in support)
    sigma2 = math.fsum(px * (y - mu) ** 2 for px, y in support)
    return IncrementMoments(mu, sigma2)


def crossing_time(path, p1: Distribution, p0: Distribution, cfg: CrossingConfig) -> tuple:
    """First t with S_t >= log b, as ``(tau, censored)``; censored paths report the cap."""
    symbols = list(path)
    if len(symbols) < cfg.horizon_cap:
        raise ValueError(f"path of length {len(symbols)} is shorter than the cap {cfg.horizon_cap}")
    log_b = cfg.log_b
    s = 0.0
    for t, x in enumerate(symbols[: cfg.horizon_cap], start=1):
        s += log_ratio(p1[x], p0[x])
        if s >= log_b:
            return t, False
    return cfg.horizon_cap, True


def first_passage(p_data: Distribution, increments: np.ndarray, log_thresholds, cap: int,
                  reps: int, seed: int, threads: int | None = None) -> tuple:
    """Simulate ``reps`` walks and record first passage over every threshold.

    Returns ``(tau, censored, s_at_tau)``, each of shape (reps, n_thresholds).
    All thresholds are read off the same walks.
    """
    levels = np.asarray(log_thresholds, dtype=float)
    inc = np.asarray(increments, dtype=float)

    def block(gen, n):
        tau = np.full((n, levels.size), cap, dtype=np.int64)
        open_ = np.ones((n, levels.size), dtype=bool)
        s_tau = np.full((n, levels.size), np.nan)
        s = np.zeros(n)
        t0 = 0
        while t0 < cap and open_.any():
            width = min(CHUNK, cap - t0)
            sym = draw_symbols(p_data, gen.random((n, width)))
            cs = s[:, None] + np.cumsum(inc[sym], axis=1)
            for j, level in enumerate(levels):
                rows = np.flatnonzero(open_[:, j])
                if rows.size == 0:
                    continue
                hit = cs[rows] >= level
                crossed = hit.any(axis=1)
                first = hit.argmax(axis=1)[crossed]
                rows = rows[crossed]
                tau[rows, j] = t0 + first + 1
                s_tau[rows, j] = cs[rows, first]
                open_[rows, j] = False
            s = cs[:, -1]
            t0 += width
        return tau, open_, s_tau

    parts = run_blocks(block, reps, seed, threads)
    return (
        np.concatenate([p[0] for p in parts]),
        np.concatenate([p[1] for p in parts]),
        np.concatenate([p[2] for p in parts]),
    )


def _mean_sd(values: np.ndarray) -> tuple:
    n = values.size
    if n == 0:
        return math.nan, math.nan
    mean = math.fsum(values.tolist()) / n
    if n == 1:
        return mean, 0.0
    var = math.fsum(((values - mean) ** 2).tolist()) / (n - 1)
    return mean, math.sqrt(var)


@dataclass
class StoppingReport:
    """Crossing times for one threshold.

    Censored replications carry ``tau == horizon_cap`` and are excluded
    from ``mean`` and ``sd``.
    """

    b: float
    horizon_cap: int
    mu: float
    taus: np.ndarray = field(repr=False)
    censored: np.ndarray = field(repr=False)
    log_evidence_at_stop: np.ndarray = field(repr=False)

    def __post_init__(self):
        done = ~self.censored
        self.mean, self.sd = _mean_sd(self.taus[done].astype(float))

    @property
    def reps(self) -> int:
        return int(self.taus.size)

    @property
    def samples(self) -> list:
        return list(zip(self.taus.tolist(), self.censored.tolist()))

    @property
    def censor_rate(self) -> float:
        return float(self.censored.sum()) / self.reps

    @property
    def censor_stderr(self) -> float:
        p = self.censor_rate
        return math.sqrt(p * (1.0 - p) / self.reps)

    @property
    def mean_stderr(self) -> float:
        n = int((~self.censored).sum())
        return self.sd / math.sqrt(n) if n else math.nan

    @property
    def predicted_mean(self) -> float:
        return math.log(self.b) / self.mu if self.mu > 0 else math.inf

    @property
    def normalized_residual(self) -> float:
        return (self.mean - self.predicted_mean) / math.sqrt(math.log(self.b))

    def overshoot(self) -> np.ndarray:
        return self.log_evidence_at_stop[~self.censored] - math.log(self.b)

    def as_row(self) -> dict:
        return {
            "b": self.b,
            "predicted_mean": self.predicted_mean,
            "mean": self.mean,
            "sd": self.sd,
            "censor_rate": self.censor_rate,
            "normalized_residual": self.normalized_residual,
        }


CSV_COLUMNS = ("b", "predicted_mean", "mean", "sd", "censor_rate", "normalized_residual")


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in reports:
        row = r.as_row()
        writer.writerow([f"{row['b']:g}"] + [repr(float(row[c])) for c in CSV_COLUMNS[1:]])
    return buf.getvalue()


def simulate_stopping_grid(p_data: Distribution, p1: Distribution, p0: Distribution, thresholds,
                           horizon_cap: int, reps: int, seed: int, threads: int | None = None) -> list:
    """One StoppingReport per threshold, all read off the same simulated walks."""
    if reps < 1:
        raise ValueError("reps must be at least 1")
    cfgs = [CrossingConfig(b, horizon_cap) for b in thresholds]
    inc = increment_table(p1, p0, p_data)
    tau, cens, s_tau = first_passage(p_data, inc, [c.log_b for c in cfgs], horizon_cap, reps, seed, threads)
    mu = kl_divergence(p1, p0)
    return [
        StoppingReport(c.threshold_b, horizon_cap, mu, tau[:, j], cens[:, j], s_tau[:, j])
        for j, c in enumerate(cfgs)
    ]


def simulate_stopping(p_data: Distribution, p1: Distribution, p0: Distribution, cfg: CrossingConfig,
                      reps: int, seed: int, threads: int | None = None) -> StoppingReport:
    return simulate_stopping_grid(p_data, p1, p0, [cfg.threshold_b], cfg.horizon_cap, reps, seed, threads)[0]


def sample_complexity(alpha: float, mu: float) -> float:
    """Leading-order expected sample size log(1/alpha)/mu for a level-alpha test."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if not mu > 0.0:
        raise DomainError(f"mu must be positive, got {mu}")
    return math.log(1.0 / alpha) / mu


def sample_complexity_band(alpha: float, m: IncrementMoments, width: float = 1.0) -> tuple:
    """Leading term plus/minus ``width`` standard deviations sqrt(sigma^2/mu^3 log(1/alpha))."""
    center = sample_complexity(alpha, m.mu)
    half = width * math.sqrt(m.sigma2 / m.mu ** 3 * math.log(1.0 / alpha))
    return center - half, center + half


def detection_tail_bound(t: float, b: float, m: IncrementMoments) -> float:
    """exp(-(mu t - log b)^2 / (2 sigma^2 t)), an upper bound on P(tau_b > t)."""
    if not m.mu > 0.0:
        raise DomainError("detection needs a positive drift")
    log_b = math.log(b)
    if t < log_b / m.mu:
        raise DomainError(f"t = {t} is below log(b)/mu = {log_b / m.mu}")
    gap = max(m.mu * t - log_b, 0.0)
    if m.sigma2 == 0.0:
        return 1.0 if gap == 0.0 else 0.0
    return min(1.0, max(0.0, math.exp(-gap * gap / (2.0 * m.sigma2 * t))))


def misspec_crossing_bound(T: int, b: float, p_true: Distribution, p1: Distribution, p0: Distribution) -> float:
    """exp(-(log b + |delta| T)^2 / (2 sigma_true^2 T)) with delta the drift under p_true."""
    if T < 1:
        raise DomainError("horizon T must be at least 1")
    delta = kl_divergence(p_true, p0) - kl_divergence(p_true, p1)
    if delta >= 0.0:
        raise DomainError(f"drift {delta} under the data distribution is not negative")
    sigma2 = increment_moments(p1, p0, p_true).sigma2
    if sigma2 == 0.0:
        return 0.0
    return math.exp(-((math.log(b) + abs(delta) * T) ** 2) / (2.0 * sigma2 * T))
