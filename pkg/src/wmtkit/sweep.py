"""Random search over the channel and LM weights.

Each trial draws ``(delta_ch, delta_lm)`` from independent Gaussians
truncated (by rejection) to ``bounds`` and evaluates the objective. With
``recenter_every > 0`` the Gaussian means jump to the incumbent best point
after every ``recenter_every`` trials. Defaults: mean (0.5, 0.5), std
(0.25, 0.25), bounds [0.01, 0.99].

The point sampler is a seam: pass any ``PointSampler`` to :func:`run_sweep`
to plug in a model-based optimizer.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import numpy as np

log = logging.getLogger(__name__)

FAILED = float("-inf")

Objective = Callable[[float, float], float]


@dataclass(frozen=True)
class Trial:
    delta_ch: float
    delta_lm: float
    objective: float

    @property
    def failed(self) -> bool:
        return math.isnan(self.objective) or self.objective == FAILED


@dataclass(frozen=True)
class SweepConfig:
    iterations: int = 1000
    seed: int = 0
    gaussian_mean: tuple[float, float] = (0.5, 0.5)
    gaussian_std: tuple[float, float] = (0.25, 0.25)
    bounds: tuple[float, float] = (0.01, 0.99)
    recenter_every: int = 0

    def __post_init__(self) -> None:
        for name in ("gaussian_mean", "gaussian_std", "bounds"):
            object.__setattr__(self, name, tuple(float(x) for x in getattr(self, name)))
            if len(getattr(self, name)) != 2:
                raise ValueError(f"{name} needs exactly two values")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        lo, hi = self.bounds
        if not lo < hi:
            raise ValueError("bounds must be ordered (low < high)")
        if min(self.gaussian_std) < 0:
            raise ValueError("gaussian_std must be non-negative")
        if self.recenter_every < 0:
            raise ValueError("recenter_every must be non-negative")


_MAX_REJECTIONS = 100_000


def _truncated_normal(rng: np.random.Generator, mean: float, std: float, lo: float, hi: float) -> float:
    if std == 0.0:
        return min(max(mean, lo), hi)
    for _ in range(_MAX_REJECTIONS):
        x = float(rng.normal(mean, std))
        if lo <= x <= hi:
            return x
    # the mass inside the bounds is negligible; fall back to the nearest bound
    return min(max(mean, lo), hi)


def sample_point(
    config: SweepConfig, rng: np.random.Generator, mean: Sequence[float] | None = None
) -> tuple[float, float]:
    """Draw one ``(delta_ch, delta_lm)`` from the truncated Gaussians."""
    mean = config.gaussian_mean if mean is None else mean
    lo, hi = config.bounds
    return (
        _truncated_normal(rng, mean[0], config.gaussian_std[0], lo, hi),
        _truncated_normal(rng, mean[1], config.gaussian_std[1], lo, hi),
    )


class PointSampler(Protocol):
    def __call__(
        self, config: SweepConfig, rng: np.random.Generator, mean: Sequence[float] | None = None
    ) -> tuple[float, float]: ...


def best_trial(trials: Sequence[Trial]) -> Trial | None:
    """Highest objective; the earliest trial wins ties. Failed trials never win."""
    best: Trial | None = None
    for trial in trials:
        if not trial.failed and (best is None or trial.objective > best.objective):
            best = trial
    return best


@dataclass
class SweepResult:
    trials: list[Trial]
    best: Trial | None


def run_sweep(
    objective: Objective,
    config: SweepConfig | None = None,
    *,
    sampler: PointSampler = sample_point,
    on_trial: Callable[[int, Trial], None] | None = None,
) -> SweepResult:
    config = config or SweepConfig()
    rng = np.random.Generator(np.random.PCG64(config.seed))
    mean: tuple[float, float] = config.gaussian_mean
    trials: list[Trial] = []
    best: Trial | None = None
    for i in range(config.iterations):
        if config.recenter_every and i and i % config.recenter_every == 0 and best is not None:
            mean = (best.delta_ch, best.delta_lm)
        ch, lm = sampler(config, rng, mean)
        try:
            value = float(objective(ch, lm))
        except Exception as exc:
            log.warning("trial %d at (%.4f, %.4f) failed: %s", i, ch, lm, exc)
            value = FAILED
        trial = Trial(ch, lm, value)
        trials.append(trial)
        if not trial.failed and (best is None or value > best.objective):
            best = trial
        if on_trial is not None:
            on_trial(i, trial)
    return SweepResult(trials, best)


@dataclass(frozen=True)
class AxisFit:
    slope: float
    intercept: float


def _ols(x: Sequence[float], y: Sequence[float]) -> AxisFit:
    n = len(x)
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    sxx = math.fsum((a - mx) ** 2 for a in x)
    if sxx == 0.0:
        raise ValueError("degenerate regression: all x values are equal")
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    slope = sxy / sxx
    return AxisFit(slope, my - slope * mx)


def regression_diagnostics(trials: Sequence[Trial]) -> dict[str, AxisFit]:
    """Per-axis least-squares line of objective against each weight."""
    usable = [t for t in trials if not t.failed]
    if len(usable) < 2:
        raise ValueError("need at least two successful trials")
    y = [t.objective for t in usable]
    return {
        "delta_ch": _ols([t.delta_ch for t in usable], y),
        "delta_lm": _ols([t.delta_lm for t in usable], y),
    }
