"""Histogram toy model of recursive training with a multiplicative sampling bias.

A learner is a normalized histogram over the integers {0..N}. Each step it is
refit on a mixture of its own samples and fresh draws from the true
distribution, with the histogram multiplied by a bias vector (favoring indices
divisible by ``bias_period``) before normalization. Diversity of the fitted
distribution is tracked per step.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfigError, InvalidInputError

__all__ = [
    "DiscreteDistribution",
    "ToyConfig",
    "ToyTrace",
    "make_true_distribution",
    "fit_biased_histogram",
    "sample_discrete",
    "discrete_diversity",
    "run_toy_chain",
    "write_trace_csv",
    "write_aggregate_csv",
]


@dataclass(frozen=True)
class DiscreteDistribution:
    """Probability vector over the integer support {0..N}."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", probs)
        if probs.ndim != 1 or probs.size < 1:
            raise InvalidInputError("probs must be a non-empty 1-D vector")
        if np.any(probs < 0):
            raise InvalidInputError("probabilities must be non-negative")
        total = probs.sum()
        if abs(total - 1.0) > 1e-9:
            raise InvalidInputError(f"probabilities must sum to 1 (got {total!r})")

    @property
    def support_size(self) -> int:
        return self.probs.size

    def __len__(self) -> int:
        return self.probs.size


def make_true_distribution(n: int, exclude_period: int | None = None) -> DiscreteDistribution:
    """Uniform distribution over {0..n}, optionally excluding indices divisible
    by ``exclude_period`` (those get mass exactly 0)."""
    if n < 1:
        raise InvalidConfigError("support parameter must be >= 1")
    mass = np.ones(n + 1)
    if exclude_period is not None:
        if exclude_period < 1:
            raise InvalidConfigError("exclude_period must be a positive integer")
        mass[::exclude_period] = 0.0
    total = mass.sum()
    if total == 0:
        raise InvalidConfigError("exclusion leaves an empty support")
    return DiscreteDistribution(mass / total)


def fit_biased_histogram(
    samples, n: int, bias_period: int, bias_strength: float
) -> DiscreteDistribution:
    """Histogram of ``samples`` over {0..n}, multiplied by the bias vector
    (``bias_strength`` on indices divisible by ``bias_period``, 1 elsewhere),
    then renormalized."""
    samples = np.asarray(samples)
    if samples.size == 0:
        raise InvalidInputError("cannot fit a histogram to an empty sample")
    if bias_strength <= 0:
        raise InvalidInputError("bias_strength must be > 0")
    if bias_period < 1:
        raise InvalidInputError("bias_period must be a positive integer")
    if samples.min() < 0 or samples.max() > n:
        raise InvalidInputError(f"samples must lie in [0, {n}]")
    counts = np.bincount(samples, minlength=n + 1).astype(float)
    weighted = counts.copy()
    weighted[::bias_period] *= bias_strength
    return DiscreteDistribution(weighted / weighted.sum())


def sample_discrete(dist: DiscreteDistribution, n: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. draws from ``dist``; deterministic given the rng state."""
    if n < 1:
        raise InvalidInputError("sample size must be >= 1")
    return rng.choice(dist.support_size, size=n, p=dist.probs)


def discrete_diversity(x, support_size: int | None = None) -> dict:
    """Support fraction and Shannon entropy (nats) of a distribution or of the
    empirical histogram of an integer sample.

    For raw samples, ``support_size`` (N+1) must be given so the support
    fraction has a denominator.
    """
    if isinstance(x, DiscreteDistribution):
        probs = x.probs
    else:
        samples = np.asarray(x)
        if samples.size == 0:
            raise InvalidInputError("diversity of an empty sample is undefined")
        if support_size is None:
            raise InvalidInputError("support_size is required for raw samples")
        counts = np.bincount(samples, minlength=support_size).astype(float)
        probs = counts / counts.sum()
    nz = probs[probs > 0]
    return {
        "support_fraction": float(nz.size / probs.size),
        "shannon_entropy": float(-(nz * np.log(nz)).sum()),
    }


@dataclass
class ToyConfig:
    """Parameters of one toy chain experiment.

    ``generation_prior`` is an extension beyond the plain histogram learner:
    when True, the learner's generative step aligns its samples with the bias
    prior by emitting, for each draw, the nearest index divisible by
    ``bias_period`` (at or below the draw). With the default (False) the model
    samples its fitted histogram verbatim.
    """

    ratio: float
    support_size: int = 1000
    steps: int = 20
    runs: int = 50
    bias_period: int = 2
    bias_strength: float = 4.0
    overlap: bool = True
    accumulate: bool = True
    seed: int = 0
    generation_prior: bool = False

    def validate(self) -> None:
        if not 0.0 <= self.ratio <= 1.0:
            raise InvalidConfigError("ratio must lie in [0, 1]")
        if self.support_size < 1:
            raise InvalidConfigError("support_size must be >= 1")
        if self.steps < 1 or self.runs < 1:
            raise InvalidConfigError("steps and runs must be >= 1")
        if self.bias_period < 1:
            raise InvalidConfigError("bias_period must be >= 1")
        if self.bias_strength <= 0:
            raise InvalidConfigError("bias_strength must be > 0")
        if self.support_size < self.bias_period:
            raise InvalidConfigError("support_size must be >= bias_period")
        if not self.overlap:
            # the excluded set must leave something to sample
            if self.support_size + 1 <= 1 and self.bias_period == 1:
                raise InvalidConfigError("exclusion leaves an empty support")


@dataclass
class ToyTrace:
    """Per-(run, step) diversity records plus run-averaged curves."""

    config: ToyConfig
    # arrays of shape (runs, steps)
    support_fraction: np.ndarray = field(repr=False, default=None)
    shannon_entropy: np.ndarray = field(repr=False, default=None)

    @property
    def mean_support_fraction(self) -> np.ndarray:
        return self.support_fraction.mean(axis=0)

    @property
    def mean_shannon_entropy(self) -> np.ndarray:
        return self.shannon_entropy.mean(axis=0)

    def final_entropy_stats(self) -> tuple[float, float]:
        """Run mean and standard error of the final-step entropy."""
        final = self.shannon_entropy[:, -1]
        se = final.std(ddof=1) / np.sqrt(final.size) if final.size > 1 else 0.0
        return float(final.mean()), float(se)


def _run_single(cfg: ToyConfig, run_index: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng([cfg.seed, run_index])
    n = cfg.support_size
    true = make_true_distribution(n, None if cfg.overlap else cfg.bias_period)

    n_syn = int(np.floor(cfg.ratio * n))
    n_hum = n - n_syn

    support = np.empty(cfg.steps)
    entropy = np.empty(cfg.steps)

    draws = sample_discrete(true, n, rng)
    pool = [draws]
    model = fit_biased_histogram(draws, n, cfg.bias_period, cfg.bias_strength)
    d = discrete_diversity(model)
    support[0], entropy[0] = d["support_fraction"], d["shannon_entropy"]

    for step in range(1, cfg.steps):
        parts = []
        if n_syn:
            syn = sample_discrete(model, n_syn, rng)
            if cfg.generation_prior:
                syn = syn - (syn % cfg.bias_period)
            parts.append(syn)
        if n_hum:
            parts.append(sample_discrete(true, n_hum, rng))
        new = np.concatenate(parts)
        pool.append(new)
        fit_data = np.concatenate(pool) if cfg.accumulate else new
        model = fit_biased_histogram(fit_data, n, cfg.bias_period, cfg.bias_strength)
        d = discrete_diversity(model)
        support[step], entropy[step] = d["support_fraction"], d["shannon_entropy"]

    return support, entropy


def run_toy_chain(cfg: ToyConfig) -> ToyTrace:
    """Run ``cfg.runs`` independent chains and record per-step diversity of the
    fitted model. Step 0 fits on N true draws; step t >= 1 fits on
    floor(r*N) model draws plus the human remainder, over the accumulated
    union (accumulate) or the current step only (replace)."""
    cfg.validate()
    support = np.empty((cfg.runs, cfg.steps))
    entropy = np.empty((cfg.runs, cfg.steps))
    for run in range(cfg.runs):
        support[run], entropy[run] = _run_single(cfg, run)
    return ToyTrace(config=cfg, support_fraction=support, shannon_entropy=entropy)


def write_trace_csv(trace: ToyTrace, path) -> None:
    """One row per (run, step): run,step,r,support_fraction,shannon_entropy."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run", "step", "r", "support_fraction", "shannon_entropy"])
        for run in range(trace.config.runs):
            for step in range(trace.config.steps):
                w.writerow([
                    run,
                    step,
                    repr(trace.config.ratio),
                    repr(float(trace.support_fraction[run, step])),
                    repr(float(trace.shannon_entropy[run, step])),
                ])


def write_aggregate_csv(traces: list[ToyTrace], path) -> None:
    """Run-averaged curves, one row per (r, step)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "step", "mean_support_fraction", "mean_shannon_entropy"])
        for trace in traces:
            msf = trace.mean_support_fraction
            mse = trace.mean_shannon_entropy
            for step in range(trace.config.steps):
                w.writerow([
                    repr(trace.config.ratio),
                    step,
                    repr(float(msf[step])),
                    repr(float(mse[step])),
                ])
