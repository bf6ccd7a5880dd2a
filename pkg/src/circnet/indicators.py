"""Circularity and auxiliary indicators of a mass-flow matrix.

The cycle-dependent group (three absolute and three relative
circularities, cyclicity, flow sharing) is computed from the enumerated
cycles; the cycle-independent group (connectivity, directionality, the
stock/flow aggregates, and the accumulation-depletion vector) reads the
matrix and degree structure directly.  ``compute_report`` runs both and
returns the full :class:`~circnet.model.IndicatorReport`.

Undefined cases carry flags instead of raising:

* no arcs at all: the absolute circularities are 0/0 and flagged;
* arcs but no cycle: the absolute circularities are exactly 0;
* empty lower triangle: directionality is flagged rather than infinite;
* a single vertex has no stock spread, so theta_d is flagged.

Directionality compares the upper to the lower triangle and therefore
depends on how vertices are numbered; every other indicator is
invariant under relabelling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cycles import CycleAnalysis, build_digraph, enumerate_cycles
from .model import (
    DEFAULT_EPS_FLOW,
    DEFAULT_MAX_CYCLES,
    DirectedCycle,
    IndicatorReport,
    MassFlowDigraph,
    MassFlowMatrix,
)


class NonPositiveFlowError(ValueError):
    def __init__(self, value: float):
        super().__init__(f"cycle means need strictly positive flows, got {value!r}")


def _check_weights(phi: DirectedCycle) -> None:
    for w in phi.weights:
        if not w > 0.0:
            raise NonPositiveFlowError(w)


def cycle_gm(phi: DirectedCycle) -> float:
    """Geometric mean of the cycle's flows, computed in log space so
    long cycles neither overflow nor underflow."""
    _check_weights(phi)
    logsum = 0.0
    for w in phi.weights:
        logsum += math.log(w)
    return math.exp(logsum / phi.length)


def cycle_hm(phi: DirectedCycle) -> float:
    """Harmonic mean of the cycle's flows."""
    _check_weights(phi)
    invsum = 0.0
    for w in phi.weights:
        invsum += 1.0 / w
    return phi.length / invsum


def cycle_am(phi: DirectedCycle) -> float:
    """Arithmetic mean of the cycle's flows."""
    _check_weights(phi)
    wsum = 0.0
    for w in phi.weights:
        wsum += w
    return wsum / phi.length


@dataclass(frozen=True)
class CycleMeans:
    gm: float
    hm: float
    am: float


def cycle_means(phi: DirectedCycle) -> CycleMeans:
    return CycleMeans(gm=cycle_gm(phi), hm=cycle_hm(phi), am=cycle_am(phi))


@dataclass(frozen=True)
class CycleDependentIndicators:
    lambda_ga: float | None
    lambda_gr: float
    lambda_ha: float | None
    lambda_hr: float
    lambda_aa: float | None
    lambda_ar: float
    lambda_y: int
    lambda_s: float
    flags: tuple[str, ...]


def cycle_dependent_indicators(analysis: CycleAnalysis) -> CycleDependentIndicators:
    """Relative circularities are the summed cycle means; the absolute
    ones divide by the same sum plus the weight of arcs on no cycle."""
    gr = 0.0
    hr = 0.0
    ar = 0.0
    for phi in analysis.cycles:
        gr += cycle_gm(phi)
        hr += cycle_hm(phi)
        ar += cycle_am(phi)

    q_sum = 0.0
    for arc in analysis.q_arcs:
        q_sum += arc.weight
    s_sum = 0.0
    for arc in analysis.s_arcs:
        s_sum += arc.weight

    flags: list[str] = []
    if analysis.n_phi > 0:
        if q_sum == 0.0:
            ga: float | None = 1.0
            ha: float | None = 1.0
            aa: float | None = 1.0
        else:
            ga = gr / (gr + q_sum)
            ha = hr / (hr + q_sum)
            aa = ar / (ar + q_sum)
    elif analysis.q_arcs:
        ga = ha = aa = 0.0
    else:
        # no arcs at all: 0/0, flagged instead of invented
        ga = ha = aa = None
        flags += ["lambda_ga_undefined", "lambda_ha_undefined", "lambda_aa_undefined"]

    return CycleDependentIndicators(
        lambda_ga=ga,
        lambda_gr=gr,
        lambda_ha=ha,
        lambda_hr=hr,
        lambda_aa=aa,
        lambda_ar=ar,
        lambda_y=analysis.n_phi,
        lambda_s=s_sum,
        flags=tuple(flags),
    )


@dataclass(frozen=True)
class CycleIndependentIndicators:
    lambda_c: float
    lambda_d: float | None
    theta_s: float
    theta_f: float
    theta_d: float | None
    theta_a: tuple[float, ...]
    flags: tuple[str, ...]


def cycle_independent_indicators(
    gamma: MassFlowMatrix, d: MassFlowDigraph
) -> CycleIndependentIndicators:
    values = gamma.values
    n_v = gamma.n_v
    flags: list[str] = []

    lambda_c = (sum(d.in_degrees) + sum(d.out_degrees)) / n_v

    upper = float(np.triu(values, 1).sum())
    lower = float(np.tril(values, -1).sum())
    if lower == 0.0:
        lambda_d = None
        flags.append("lambda_d_undefined")
    else:
        lambda_d = upper / lower

    diagonal = np.diag(values)
    theta_s = float(diagonal.sum())
    # off-diagonal sums computed without touching the diagonal, so the
    # flow aggregates do not pick up rounding from the stock magnitudes
    off = np.where(np.eye(n_v, dtype=bool), 0.0, values)
    theta_f = float(off.sum())
    if n_v > 1:
        theta_d = float(np.std(diagonal, ddof=1))
    else:
        theta_d = None
        flags.append("theta_d_undefined")

    theta_a = tuple(float(x) for x in (off.sum(axis=0) - off.sum(axis=1)))

    return CycleIndependentIndicators(
        lambda_c=float(lambda_c),
        lambda_d=lambda_d,
        theta_s=theta_s,
        theta_f=theta_f,
        theta_d=theta_d,
        theta_a=theta_a,
        flags=tuple(flags),
    )


def compute_report(
    gamma: MassFlowMatrix,
    max_cycles: int = DEFAULT_MAX_CYCLES,
    eps_flow: float = DEFAULT_EPS_FLOW,
) -> IndicatorReport:
    """Full indicator set for one matrix.  Deterministic; propagates
    :class:`~circnet.cycles.CycleBudgetExceededError`."""
    digraph = build_digraph(gamma, eps_flow=eps_flow)
    analysis = enumerate_cycles(digraph, max_cycles=max_cycles)
    dep = cycle_dependent_indicators(analysis)
    ind = cycle_independent_indicators(gamma, digraph)
    return IndicatorReport(
        lambda_ga=dep.lambda_ga,
        lambda_gr=dep.lambda_gr,
        lambda_ha=dep.lambda_ha,
        lambda_hr=dep.lambda_hr,
        lambda_aa=dep.lambda_aa,
        lambda_ar=dep.lambda_ar,
        lambda_c=ind.lambda_c,
        lambda_y=dep.lambda_y,
        lambda_s=dep.lambda_s,
        lambda_d=ind.lambda_d,
        theta_s=ind.theta_s,
        theta_f=ind.theta_f,
        theta_d=ind.theta_d,
        theta_a=ind.theta_a,
        flags=dep.flags + ind.flags,
    )
