"""Monte Carlo treatment of networks with distribution-valued entries.

Sampling is counter-based and order-independent: each matrix position
owns a Philox stream keyed by (seed, flattened position), and sample i
is the i-th variate of that stream.  Every distribution is drawn by
inverse transform from exactly one uniform, so a single sample can be
regenerated without producing its predecessors, and batches match
one-at-a-time draws bit for bit.  Entry draws are mutually independent;
correlated entries are out of scope.

Two summaries are reported and deliberately kept apart: the indicator
set of the entrywise sample-mean matrix, and the per-sample ensemble
statistics of each indicator.  The indicators are nonlinear in the
matrix, so the two generally differ.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from . import _kernels
from .cycles import CycleBudgetExceededError
from .indicators import compute_report
from .model import (
    DEFAULT_EPS_FLOW,
    DEFAULT_MAX_CYCLES,
    Constant,
    Distribution,
    Entry,
    IndicatorReport,
    MassFlowMatrix,
    NetworkSpec,
    SCALAR_FIELDS,
    entry_value,
    validate_matrix,
)


class UnsupportedDistributionError(ValueError):
    pass


class TimeRequiredError(ValueError):
    def __init__(self) -> None:
        super().__init__(
            "the network has time-dependent entries; pass the evaluation time"
        )


def _entry_uniforms(seed: int, entry_index: int, start: int, count: int) -> np.ndarray:
    """Uniform variates [start, start+count) of one entry's stream.

    Philox advances in blocks of four 64-bit words, so jump to the
    enclosing block and discard the within-block offset.
    """
    if seed < 0:
        raise ValueError("seed must be >= 0")
    key = np.array([seed, entry_index], dtype=np.uint64)
    bg = np.random.Philox(key=key)
    if start >= 4:
        bg.advance(start // 4)
    skip = start % 4
    return np.random.Generator(bg).random(skip + count)[skip:]


def _quantile(dist: Distribution, u: np.ndarray) -> np.ndarray:
    """Inverse CDF of a supported distribution; support stays in [0, inf)."""
    if dist.kind == "constant":
        return np.full_like(u, dist.params[0])
    if dist.kind == "uniform":
        a, b = dist.params
        return a + (b - a) * u
    if dist.kind == "truncated-normal":
        mu, sigma = dist.params
        alpha = ndtr((0.0 - mu) / sigma)
        x = mu + sigma * ndtri(alpha + u * (1.0 - alpha))
        return np.maximum(x, 0.0)
    if dist.kind == "lognormal":
        mu_log, sigma_log = dist.params
        return np.exp(mu_log + sigma_log * ndtri(u))
    raise UnsupportedDistributionError(f"distribution kind {dist.kind!r}")


def _entry_index(i: int, j: int, n_v: int) -> int:
    return (i - 1) * n_v + (j - 1)


def _fixed_value(entry: Entry, position: tuple[int, int], at_t: float | None) -> float:
    from .model import Expression, Tabulated

    if isinstance(entry, Constant):
        return entry.value
    if isinstance(entry, (Expression, Tabulated)) and at_t is None:
        raise TimeRequiredError()
    return entry_value(entry, at_t if at_t is not None else 0.0, position)


def draw_samples(
    spec: NetworkSpec, n_s: int, seed: int, at_t: float | None = None
) -> np.ndarray:
    """Stack of ``n_s`` matrix samples, shape (n_s, n_v, n_v).

    Distribution entries are drawn independently per sample; everything
    else is evaluated once (time-dependent entries need ``at_t``).
    """
    if n_s < 1:
        raise ValueError("need at least one sample")
    n_v = spec.n_v
    out = np.zeros((n_s, n_v, n_v), dtype=np.float64)
    for k, entry in enumerate(spec.stocks, start=1):
        _fill_entry(out, entry, (k, k), spec, seed, at_t)
    for f in spec.flows:
        _fill_entry(out, f.entry, (f.tail, f.head), spec, seed, at_t)
    return out


def _fill_entry(out, entry, position, spec, seed, at_t) -> None:
    i, j = position
    n_s = out.shape[0]
    if isinstance(entry, Distribution):
        u = _entry_uniforms(seed, _entry_index(i, j, spec.n_v), 0, n_s)
        out[:, i - 1, j - 1] = _quantile(entry, u)
    else:
        out[:, i - 1, j - 1] = _fixed_value(entry, position, at_t)


def draw_sample(
    spec: NetworkSpec, seed: int, sample_index: int = 0, at_t: float | None = None
) -> MassFlowMatrix:
    """One reproducible sample: equals row ``sample_index`` of
    :func:`draw_samples` regardless of batch size."""
    if sample_index < 0:
        raise ValueError("sample_index must be >= 0")
    n_v = spec.n_v
    grid = np.zeros((n_v, n_v), dtype=np.float64)
    for k, entry in enumerate(spec.stocks, start=1):
        grid[k - 1, k - 1] = _single_value(entry, (k, k), spec, seed, sample_index, at_t)
    for f in spec.flows:
        grid[f.tail - 1, f.head - 1] = _single_value(
            f.entry, (f.tail, f.head), spec, seed, sample_index, at_t
        )
    return validate_matrix(grid)


def _single_value(entry, position, spec, seed, sample_index, at_t) -> float:
    if isinstance(entry, Distribution):
        i, j = position
        u = _entry_uniforms(seed, _entry_index(i, j, spec.n_v), sample_index, 1)
        return float(_quantile(entry, u)[0])
    return _fixed_value(entry, position, at_t)


def _entrywise_mean(samples: np.ndarray) -> np.ndarray:
    """Mean over the sample axis, exact for degenerate entries: a column
    of identical values averages to that value bit for bit, so constant
    networks round-trip through the stochastic path unchanged."""
    mean = samples.mean(axis=0)
    first = samples[0]
    degenerate = (samples == first[None, :, :]).all(axis=0)
    return np.where(degenerate, first, mean)


def sample_mean_matrix(
    spec: NetworkSpec, n_s: int, seed: int, at_t: float | None = None
) -> MassFlowMatrix:
    """Entrywise mean of ``n_s`` samples; deterministic for a fixed seed."""
    samples = draw_samples(spec, n_s, seed, at_t=at_t)
    return validate_matrix(_entrywise_mean(samples))


@dataclass(frozen=True)
class EnsembleStat:
    """Mean and population standard deviation of one indicator across
    the samples where it was defined."""

    mean: float | None
    std: float | None
    undefined_count: int


@dataclass(frozen=True)
class StochasticReport:
    mean_matrix: MassFlowMatrix
    mean_report: IndicatorReport
    ensemble: dict[str, EnsembleStat] = field(compare=False)
    n_s: int = 0
    seed: int = 0


def stochastic_indicators(
    spec: NetworkSpec,
    n_s: int,
    seed: int,
    at_t: float | None = None,
    max_cycles: int = DEFAULT_MAX_CYCLES,
    eps_flow: float = DEFAULT_EPS_FLOW,
) -> StochasticReport:
    """Sample-mean indicators plus per-indicator ensemble dispersion.

    ``mean_report`` is the indicator set of the sample-mean matrix.  The
    ensemble statistics come from evaluating every indicator on every
    sample; samples where an indicator is undefined (for example a draw
    that disconnects the digraph) are excluded from its mean/std and
    counted in ``undefined_count``.
    """
    samples = draw_samples(spec, n_s, seed, at_t=at_t)
    mean_matrix = validate_matrix(_entrywise_mean(samples))
    mean_report = compute_report(mean_matrix, max_cycles=max_cycles, eps_flow=eps_flow)

    rows, bad = _kernels.ensemble_rows(samples, eps_flow, max_cycles)
    if bad >= 0:
        raise CycleBudgetExceededError(max_cycles)

    names = list(SCALAR_FIELDS) + [f"theta_a_{k}" for k in range(1, spec.n_v + 1)]
    ensemble: dict[str, EnsembleStat] = {}
    for col, name in enumerate(names):
        values = rows[:, col]
        defined = values[~np.isnan(values)]
        if defined.size:
            stat = EnsembleStat(
                mean=float(defined.mean()),
                std=float(defined.std(ddof=0)),
                undefined_count=int(n_s - defined.size),
            )
        else:
            stat = EnsembleStat(mean=None, std=None, undefined_count=n_s)
        ensemble[name] = stat

    return StochasticReport(
        mean_matrix=mean_matrix,
        mean_report=mean_report,
        ensemble=ensemble,
        n_s=n_s,
        seed=seed,
    )
