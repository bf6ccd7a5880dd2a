"""Time-dependent analysis: indicator trajectories, detection of arc-set
changes, and verification or imposition of the mass balance.

The mass balance couples the diagonal to the off-diagonal entries: each
stock's derivative must equal its accumulation-depletion component
(inflow minus outflow).  ``verify_mass_balance`` checks that on a grid;
``impose_mass_balance`` integrates the stock ODEs with fixed-step RK4 so
the result satisfies it by construction, and returns a corrected network
whose stocks are the tabulated trajectories.

Closed networks only: the external inflow and outflow are fixed to zero,
so total mass is conserved.  Model an open system by adding explicit
environment vertices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .indicators import compute_report
from .model import (
    DEFAULT_EPS_FLOW,
    DEFAULT_MAX_CYCLES,
    IndicatorReport,
    NegativeEntryError,
    NetworkSpec,
    SpecError,
    Tabulated,
    TimeWindow,
    entry_value,
    network_to_matrix,
    validate_matrix,
)

DEFAULT_REFINE_TOL = 1e-9


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    """Uniform sampling of a closed interval, ``n_steps`` points."""

    start: float
    end: float
    n_steps: int

    def __post_init__(self) -> None:
        if not (self.start < self.end):
            raise SpecError(f"need start < end, got [{self.start}, {self.end}]")
        if self.n_steps < 2:
            raise SpecError("need at least 2 grid points")

    @property
    def h(self) -> float:
        return (self.end - self.start) / (self.n_steps - 1)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.start, self.end, self.n_steps)

    @classmethod
    def from_window(cls, window: TimeWindow) -> "TimeGrid":
        return cls(start=window.start, end=window.end, n_steps=window.steps)


def indicator_trajectory(
    spec: NetworkSpec,
    grid: TimeGrid,
    max_cycles: int = DEFAULT_MAX_CYCLES,
    eps_flow: float = DEFAULT_EPS_FLOW,
) -> list[tuple[float, IndicatorReport]]:
    """One full indicator report per grid instant."""
    out = []
    for t in grid.times:
        gamma = network_to_matrix(spec, float(t))
        out.append(
            (float(t), compute_report(gamma, max_cycles=max_cycles, eps_flow=eps_flow))
        )
    return out


# ---------------------------------------------------------------------------
# Topology changes


@dataclass(frozen=True)
class TopologyChange:
    """An instant at which the arc set changes.

    ``touching`` marks the degenerate case of a flow grazing zero at an
    isolated point: the arc sets on both sides are identical, and the
    same arcs appear in both ``vanished`` and ``appeared``.
    """

    t_star: float
    appeared: tuple[tuple[int, int], ...]
    vanished: tuple[tuple[int, int], ...]
    touching: bool


@dataclass(frozen=True)
class TopologyInterval:
    t_start: float
    t_end: float
    arcs: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class TopologyTimeline:
    intervals: tuple[TopologyInterval, ...]
    changes: tuple[TopologyChange, ...]

    def change_instants(self) -> tuple[float, ...]:
        return tuple(c.t_star for c in self.changes)


def _arc_signature(spec: NetworkSpec, t: float, eps_flow: float) -> tuple[tuple[int, int], ...]:
    present = []
    for f in spec.flows:
        if entry_value(f.entry, t, (f.tail, f.head)) > eps_flow:
            present.append((f.tail, f.head))
    present.sort()
    return tuple(present)


def _bisect_crossing(entry, lo: float, hi: float, eps_flow: float, tol: float) -> float:
    """Refine the instant at which an entry crosses the arc threshold."""
    above_lo = entry_value(entry, lo) > eps_flow
    for _ in range(200):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if (entry_value(entry, mid) > eps_flow) == above_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _crossing_events(
    spec: NetworkSpec,
    times: np.ndarray,
    eps_flow: float,
    refine_tol: float,
) -> tuple[list[tuple], list[tuple[int, tuple]]]:
    """Locate all threshold crossings between consecutive samples.

    Returns (events, runs): each event is
    ``(t_cross, (tail, head), appeared, boundary_index)`` and each run is
    ``(first_sample_index, signature)``.
    """
    flow_entry = {(f.tail, f.head): f.entry for f in spec.flows}
    sigs = [_arc_signature(spec, float(t), eps_flow) for t in times]
    runs: list[tuple[int, tuple]] = [(0, sigs[0])]
    events: list[tuple] = []
    for b in range(1, len(times)):
        if sigs[b] == sigs[b - 1]:
            continue
        before, after = set(sigs[b - 1]), set(sigs[b])
        for arc in sorted(before.symmetric_difference(after)):
            t_cross = _bisect_crossing(
                flow_entry[arc], float(times[b - 1]), float(times[b]), eps_flow, refine_tol
            )
            events.append((t_cross, arc, arc in after, b))
        runs.append((b, sigs[b]))
    return events, runs


def detect_topology_changes(
    spec: NetworkSpec,
    grid: TimeGrid,
    refine_tol: float = DEFAULT_REFINE_TOL,
    eps_flow: float = DEFAULT_EPS_FLOW,
) -> TopologyTimeline:
    """Sample the arc set on the grid and refine every change by bisection.

    Crossings closer together than a few refine tolerances collapse into
    one change instant; a vanish/appear pair of the same arc with equal
    flanking arc sets is reported once with ``touching=True``.
    """
    times = grid.times
    events, runs = _crossing_events(spec, times, eps_flow, refine_tol)

    # intervals between consecutive run boundaries, refined where possible
    boundary_time: dict[int, float] = {}
    for t_cross, _arc, _app, b in events:
        boundary_time.setdefault(b, t_cross)
    intervals = []
    for r, (first_idx, sig) in enumerate(runs):
        lo = grid.start if r == 0 else boundary_time.get(first_idx, float(times[first_idx]))
        if r + 1 < len(runs):
            nxt = runs[r + 1][0]
            hi = boundary_time.get(nxt, float(times[nxt]))
        else:
            hi = grid.end
        intervals.append(TopologyInterval(t_start=lo, t_end=hi, arcs=sig))

    # cluster events into change instants
    events.sort(key=lambda e: e[0])
    gap = max(4.0 * refine_tol, 1e-12)
    changes: list[TopologyChange] = []
    i = 0
    sig_by_run_start = dict(runs)
    run_starts = sorted(sig_by_run_start)
    while i < len(events):
        j = i
        while j + 1 < len(events) and events[j + 1][0] - events[j][0] <= gap:
            j += 1
        cluster = events[i : j + 1]
        t_star = sum(e[0] for e in cluster) / len(cluster)
        appeared = tuple(sorted({e[1] for e in cluster if e[2]}))
        vanished = tuple(sorted({e[1] for e in cluster if not e[2]}))
        first_b = min(e[3] for e in cluster)
        last_b = max(e[3] for e in cluster)
        sig_before = _run_sig_before(run_starts, sig_by_run_start, first_b)
        sig_after = _run_sig_at(run_starts, sig_by_run_start, last_b)
        changes.append(
            TopologyChange(
                t_star=t_star,
                appeared=appeared,
                vanished=vanished,
                touching=sig_before == sig_after,
            )
        )
        i = j + 1

    return TopologyTimeline(intervals=tuple(intervals), changes=tuple(changes))


def _run_sig_before(run_starts, sig_by_run_start, boundary: int):
    prev = [s for s in run_starts if s < boundary]
    return sig_by_run_start[prev[-1]] if prev else None


def _run_sig_at(run_starts, sig_by_run_start, boundary: int):
    at = [s for s in run_starts if s <= boundary]
    return sig_by_run_start[at[-1]] if at else None


# ---------------------------------------------------------------------------
# Mass balance


def _theta_a_from_flows(spec: NetworkSpec, t: float) -> np.ndarray:
    """Accumulation-depletion vector from the flow entries alone."""
    acc = np.zeros(spec.n_v, dtype=np.float64)
    for f in spec.flows:
        v = entry_value(f.entry, t, (f.tail, f.head))
        if not (v >= 0.0) or not np.isfinite(v):
            raise NegativeEntryError(f.tail, f.head, v)
        acc[f.head - 1] += v
        acc[f.tail - 1] -= v
    return acc


def _stencil_derivative(values: np.ndarray, times: np.ndarray, kinks: np.ndarray) -> np.ndarray:
    """Second-order finite differences that never straddle a kink.

    ``values`` is (n, k) sampled on a uniform grid.  Central differences
    are O(h) wrong at a sample sitting on a derivative kink (the flows
    are continuous but not smooth where they touch zero), so near a kink
    the stencil switches to the one-sided form on the smooth side.
    """
    n = values.shape[0]
    h = float(times[1] - times[0])
    margin = 1e-3 * h

    def clear(lo: float, hi: float) -> bool:
        a = np.searchsorted(kinks, lo + margin, side="right")
        b = np.searchsorted(kinks, hi - margin, side="left")
        return a >= b

    out = np.empty_like(values)
    for i in range(n):
        if 0 < i < n - 1 and clear(times[i - 1], times[i + 1]):
            out[i] = (values[i + 1] - values[i - 1]) / (2.0 * h)
        elif i <= n - 3 and clear(times[i], times[i + 2]):
            out[i] = (-3.0 * values[i] + 4.0 * values[i + 1] - values[i + 2]) / (2.0 * h)
        elif i >= 2 and clear(times[i - 2], times[i]):
            out[i] = (3.0 * values[i] - 4.0 * values[i - 1] + values[i - 2]) / (2.0 * h)
        elif 0 < i < n - 1:
            out[i] = (values[i + 1] - values[i - 1]) / (2.0 * h)
        elif i == 0:
            out[i] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h)
        else:
            out[i] = (3.0 * values[-1] - 4.0 * values[-2] + values[-3]) / (2.0 * h)
    return out


def _kink_instants(spec: NetworkSpec, grid: TimeGrid, eps_flow: float) -> np.ndarray:
    events, _runs = _crossing_events(spec, grid.times, eps_flow, DEFAULT_REFINE_TOL)
    return np.array(sorted(e[0] for e in events), dtype=np.float64)


@dataclass(frozen=True)
class BalanceVerdict:
    consistent: bool
    max_residual: float
    worst_vertex: int
    worst_time: float
    tol: float
    residuals: np.ndarray = field(compare=False, repr=False)


def verify_mass_balance(
    spec: NetworkSpec,
    grid: TimeGrid,
    tol: float,
    eps_flow: float = DEFAULT_EPS_FLOW,
) -> BalanceVerdict:
    """Compare each stock's sampled derivative with its inflow-outflow
    balance.  Consistent when the worst residual is within ``tol``."""
    times = grid.times
    n = len(times)
    stocks = np.empty((n, spec.n_v), dtype=np.float64)
    theta = np.empty((n, spec.n_v), dtype=np.float64)
    for i, t in enumerate(times):
        tf = float(t)
        for k, entry in enumerate(spec.stocks, start=1):
            stocks[i, k - 1] = entry_value(entry, tf, (k, k))
        theta[i] = _theta_a_from_flows(spec, tf)

    kinks = _kink_instants(spec, grid, eps_flow)
    residuals = theta - _stencil_derivative(stocks, times, kinks)
    flat = int(np.abs(residuals).argmax())
    wi, wk = divmod(flat, spec.n_v)
    max_residual = float(np.abs(residuals[wi, wk]))
    residuals.setflags(write=False)
    return BalanceVerdict(
        consistent=bool(max_residual <= tol),
        max_residual=max_residual,
        worst_vertex=wk + 1,
        worst_time=float(times[wi]),
        tol=tol,
        residuals=residuals,
    )


@dataclass(frozen=True)
class NegativeStockEvent:
    vertex: int
    t: float
    value: float


@dataclass(frozen=True)
class BalanceResult:
    """Integrated stock trajectories satisfying the mass balance.

    ``corrected`` is the input network with its stocks replaced by the
    tabulated trajectories; external flows are fixed to zero (closed
    network), so ``m_net`` stays constant up to integration error.
    Vertices whose trajectory dips below zero are listed in
    ``negative_stocks``; the trajectory is returned either way.
    """

    grid: TimeGrid
    stocks: np.ndarray = field(compare=False, repr=False)
    residuals: np.ndarray = field(compare=False, repr=False)
    m_net: np.ndarray = field(compare=False, repr=False)
    negative_stocks: tuple[NegativeStockEvent, ...]
    corrected: NetworkSpec
    m_in: float = 0.0
    m_out: float = 0.0


def impose_mass_balance(
    spec: NetworkSpec,
    m0,
    grid: TimeGrid,
    negative_tol: float = 1e-9,
    eps_flow: float = DEFAULT_EPS_FLOW,
) -> BalanceResult:
    """Integrate the stock ODEs from ``m0`` with fixed-step RK4.

    The source term depends on time only, so the integrated stocks are
    automatically continuous across arc-set changes; accuracy drops from
    fourth to third order locally where a flow touches zero.
    """
    m0 = np.asarray(m0, dtype=np.float64)
    if m0.shape != (spec.n_v,):
        raise SpecError(f"m0 must have length {spec.n_v}, got shape {m0.shape}")
    if not np.all(np.isfinite(m0)) or np.any(m0 < 0.0):
        raise SpecError("initial stocks must be finite and >= 0")

    times = grid.times
    n = len(times)
    theta_nodes = np.empty((n, spec.n_v), dtype=np.float64)
    theta_mids = np.empty((n - 1, spec.n_v), dtype=np.float64)
    for i in range(n):
        theta_nodes[i] = _theta_a_from_flows(spec, float(times[i]))
    for i in range(n - 1):
        theta_mids[i] = _theta_a_from_flows(spec, 0.5 * (float(times[i]) + float(times[i + 1])))

    stocks = _kernels.rk4_integrate(theta_nodes, theta_mids, grid.h, m0)

    negatives = []
    for k in range(spec.n_v):
        below = np.nonzero(stocks[:, k] < -negative_tol)[0]
        if below.size:
            i = int(below[0])
            negatives.append(
                NegativeStockEvent(vertex=k + 1, t=float(times[i]), value=float(stocks[i, k]))
            )

    kinks = _kink_instants(spec, grid, eps_flow)
    residuals = theta_nodes - _stencil_derivative(stocks, times, kinks)

    # stocks go back verbatim, negative excursions included: clamping
    # would silently break conservation, flagging does not
    time_tuple = tuple(float(t) for t in times)
    corrected = NetworkSpec(
        n_v=spec.n_v,
        stocks=tuple(
            Tabulated(times=time_tuple, values=tuple(stocks[:, k]))
            for k in range(spec.n_v)
        ),
        flows=spec.flows,
        time_window=TimeWindow(start=grid.start, end=grid.end, steps=grid.n_steps),
        vertex_labels=spec.vertex_labels,
    )

    stocks = stocks.copy()
    stocks.setflags(write=False)
    residuals.setflags(write=False)
    m_net = stocks.sum(axis=1)
    m_net.setflags(write=False)
    return BalanceResult(
        grid=grid,
        stocks=stocks,
        residuals=residuals,
        m_net=m_net,
        negative_stocks=tuple(negatives),
        corrected=corrected,
    )


def corrected_indicator_trajectory(
    result: BalanceResult,
    spec: NetworkSpec,
    grid: TimeGrid,
    max_cycles: int = DEFAULT_MAX_CYCLES,
    eps_flow: float = DEFAULT_EPS_FLOW,
) -> list[tuple[float, IndicatorReport]]:
    """Indicator trajectory of the corrected matrix: the stock-dependent
    aggregates follow the integrated stocks, everything else matches the
    uncorrected trajectory."""
    if result.grid != grid:
        raise GridMismatchError(
            f"balance result was integrated on {result.grid}, not {grid}"
        )
    out = []
    times = grid.times
    for i, t in enumerate(times):
        tf = float(t)
        gamma = np.zeros((spec.n_v, spec.n_v), dtype=np.float64)
        for f in spec.flows:
            gamma[f.tail - 1, f.head - 1] = entry_value(f.entry, tf, (f.tail, f.head))
        np.fill_diagonal(gamma, result.stocks[i])
        report = compute_report(
            validate_matrix(gamma), max_cycles=max_cycles, eps_flow=eps_flow
        )
        out.append((tf, report))
    return out
