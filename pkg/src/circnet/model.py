"""Core domain types: mass-flow matrices, network descriptions, digraphs,
directed cycles, and the indicator report.

Conventions
-----------
* Vertices are numbered 1..n_v in every user-facing structure; numpy
  matrices are the only 0-indexed surface.
* A matrix entry ``gamma[i][j]`` is a stock (kg) on the diagonal and a
  flow rate (kg/s) off the diagonal.  Stocks may be zero; nothing may be
  negative.
* An arc exists where an off-diagonal entry exceeds ``DEFAULT_EPS_FLOW``;
  the threshold separates exact-zero entries from round-off residue.
* All types are immutable after construction and safe to share between
  threads; the operations in this package are pure functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import expr

#: Arc-existence threshold: off-diagonal values at or below this are
#: treated as "no flow".  Configurable per call in the graph builders.
DEFAULT_EPS_FLOW = 1e-12

#: Default ceiling on the number of enumerated cycles; enumeration can be
#: exponential in the vertex count, so fail loudly rather than hang.
DEFAULT_MAX_CYCLES = 10**6


class ModelError(ValueError):
    """Base class for domain validation errors."""


class MatrixValidationError(ModelError):
    pass


class EmptyMatrixError(MatrixValidationError):
    def __init__(self) -> None:
        super().__init__("matrix has no entries")


class NonSquareError(MatrixValidationError):
    def __init__(self, shape) -> None:
        self.shape = tuple(shape)
        super().__init__(f"matrix must be square, got shape {self.shape}")


class NegativeEntryError(MatrixValidationError):
    def __init__(self, i: int, j: int, value: float) -> None:
        self.i, self.j, self.value = i, j, value
        super().__init__(
            f"entry ({i},{j}) = {value!r} is negative or not finite"
        )


class SpecError(ModelError):
    """A NetworkSpec invariant is violated."""


class DistributionEntryPresentError(ModelError):
    def __init__(self, i: int, j: int) -> None:
        self.i, self.j = i, j
        super().__init__(
            f"entry ({i},{j}) is a distribution; draw a sample before "
            "evaluating deterministically"
        )


class ExpressionDomainError(ModelError):
    """An entry cannot be evaluated at the requested time."""


# ---------------------------------------------------------------------------
# Entry kinds for NetworkSpec: a matrix position is either a fixed number,
# a time expression, a probability distribution, or a tabulated trajectory
# (the latter is what mass-balance correction writes back for stocks).


@dataclass(frozen=True)
class Constant:
    value: float

    def __post_init__(self) -> None:
        if not (self.value >= 0.0) or not np.isfinite(self.value):
            raise SpecError(f"constant entry must be finite and >= 0, got {self.value!r}")


@dataclass(frozen=True)
class Expression:
    source: str
    root: expr.TimeExpression = field(compare=False)

    @classmethod
    def parse(cls, source: str) -> "Expression":
        return cls(source=source, root=expr.parse_expression(source))


_DISTRIBUTION_ARITY = {
    "constant": 1,
    "uniform": 2,
    "truncated-normal": 2,
    "lognormal": 2,
}


@dataclass(frozen=True)
class Distribution:
    """A nonnegatively supported distribution for one matrix entry.

    Kinds: ``constant(v)``, ``uniform(a, b)`` with 0 <= a <= b,
    ``truncated-normal(mu, sigma)`` truncated below at 0, and
    ``lognormal(mu_log, sigma_log)``.
    """

    kind: str
    params: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        arity = _DISTRIBUTION_ARITY.get(self.kind)
        if arity is None:
            raise SpecError(f"unsupported distribution kind {self.kind!r}")
        if len(self.params) != arity:
            raise SpecError(
                f"distribution {self.kind!r} takes {arity} parameters, "
                f"got {len(self.params)}"
            )
        if not all(np.isfinite(p) for p in self.params):
            raise SpecError(f"distribution parameters must be finite: {self.params}")
        if self.kind == "constant" and self.params[0] < 0.0:
            raise SpecError("constant distribution must be >= 0")
        if self.kind == "uniform":
            a, b = self.params
            if not (0.0 <= a <= b):
                raise SpecError(f"uniform bounds must satisfy 0 <= a <= b, got ({a}, {b})")
        if self.kind in ("truncated-normal", "lognormal") and self.params[1] <= 0.0:
            raise SpecError(f"{self.kind} requires a positive scale parameter")


@dataclass(frozen=True)
class Tabulated:
    """A sampled trajectory; evaluated by linear interpolation.

    Values may be negative (integrated stocks are written back without
    clamping); building a matrix from such an entry still fails
    validation, so nonphysical trajectories cannot be analysed silently.
    """

    times: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.times) < 2 or len(self.times) != len(self.values):
            raise SpecError("tabulated entry needs >= 2 (time, value) pairs")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise SpecError("tabulated times must be strictly increasing")
        if any(not np.isfinite(v) for v in self.values):
            raise SpecError("tabulated values must be finite")


Entry = Constant | Expression | Distribution | Tabulated


def entry_value(entry: Entry, t: float, position: tuple[int, int] = (0, 0)) -> float:
    """Evaluate a deterministic entry at time ``t``."""
    if isinstance(entry, Constant):
        return entry.value
    if isinstance(entry, Expression):
        return expr.evaluate(entry.root, t)
    if isinstance(entry, Tabulated):
        lo, hi = entry.times[0], entry.times[-1]
        slack = 1e-9 * max(hi - lo, 1.0)
        if t < lo - slack or t > hi + slack:
            raise ExpressionDomainError(
                f"tabulated entry {position} sampled on [{lo}, {hi}] "
                f"cannot be evaluated at t={t}"
            )
        return float(np.interp(t, entry.times, entry.values))
    raise DistributionEntryPresentError(*position)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TimeWindow:
    start: float
    end: float
    steps: int

    def __post_init__(self) -> None:
        if not (self.start < self.end):
            raise SpecError(f"time window needs start < end, got [{self.start}, {self.end}]")
        if self.steps < 2:
            raise SpecError("time window needs at least 2 steps")


@dataclass(frozen=True)
class FlowEntry:
    tail: int
    head: int
    entry: Entry


@dataclass(frozen=True)
class NetworkSpec:
    """Declarative description of a material network.

    ``stocks[k-1]`` describes vertex k's stored mass; each flow entry
    describes the transfer rate along one ordered vertex pair.  Both
    directions of a pair may carry flows (bidirectional exchange), and
    both arcs then enter the digraph.
    """

    n_v: int
    stocks: tuple[Entry, ...]
    flows: tuple[FlowEntry, ...]
    time_window: TimeWindow | None = None
    vertex_labels: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "stocks", tuple(self.stocks))
        object.__setattr__(self, "flows", tuple(self.flows))
        if self.n_v < 1:
            raise SpecError(f"need at least one vertex, got n_v={self.n_v}")
        if len(self.stocks) != self.n_v:
            raise SpecError(
                f"expected {self.n_v} stock entries, got {len(self.stocks)}"
            )
        seen: set[tuple[int, int]] = set()
        for f in self.flows:
            if not (1 <= f.tail <= self.n_v) or not (1 <= f.head <= self.n_v):
                raise SpecError(
                    f"flow ({f.tail},{f.head}) references a vertex outside 1..{self.n_v}"
                )
            if f.tail == f.head:
                raise SpecError(f"flow ({f.tail},{f.head}) may not be a self-loop")
            if (f.tail, f.head) in seen:
                raise SpecError(f"duplicate flow entry for ({f.tail},{f.head})")
            seen.add((f.tail, f.head))
        if self.vertex_labels is not None:
            object.__setattr__(self, "vertex_labels", tuple(self.vertex_labels))
            if len(self.vertex_labels) != self.n_v:
                raise SpecError("need one label per vertex")

    def has_distributions(self) -> bool:
        entries = list(self.stocks) + [f.entry for f in self.flows]
        return any(isinstance(e, Distribution) for e in entries)


# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MassFlowMatrix:
    """A validated snapshot matrix: stocks on the diagonal (kg), flow
    rates off the diagonal (kg/s).  The array is read-only."""

    values: np.ndarray

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MassFlowMatrix):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    @property
    def n_v(self) -> int:
        return self.values.shape[0]

    def stock(self, k: int) -> float:
        return float(self.values[k - 1, k - 1])

    def flow(self, i: int, j: int) -> float:
        return float(self.values[i - 1, j - 1])

    def total(self) -> float:
        return float(self.values.sum())


def validate_matrix(raw) -> MassFlowMatrix:
    """Validate a grid of reals into a :class:`MassFlowMatrix`.

    Raises :class:`EmptyMatrixError`, :class:`NonSquareError`, or
    :class:`NegativeEntryError`; never silently clamps.
    """
    arr = np.asarray(raw, dtype=np.float64)
    if arr.size == 0:
        raise EmptyMatrixError()
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise NonSquareError(arr.shape)
    bad = ~(np.isfinite(arr) & (arr >= 0.0))
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise NegativeEntryError(int(i) + 1, int(j) + 1, float(arr[i, j]))
    arr = arr.copy()
    arr.setflags(write=False)
    return MassFlowMatrix(values=arr)


def network_to_matrix(spec: NetworkSpec, t: float) -> MassFlowMatrix:
    """Evaluate every entry of ``spec`` at time ``t``.

    Deterministic: identical (spec, t) produce bit-identical matrices.
    Raises :class:`DistributionEntryPresentError` if any entry is a
    distribution; sample first.
    """
    grid = np.zeros((spec.n_v, spec.n_v), dtype=np.float64)
    for k, entry in enumerate(spec.stocks, start=1):
        grid[k - 1, k - 1] = entry_value(entry, t, (k, k))
    for f in spec.flows:
        grid[f.tail - 1, f.head - 1] = entry_value(f.entry, t, (f.tail, f.head))
    return validate_matrix(grid)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Arc:
    tail: int
    head: int
    weight: float


@dataclass(frozen=True)
class MassFlowDigraph:
    """Weighted digraph of the positive off-diagonal entries."""

    n_v: int
    arcs: tuple[Arc, ...]
    in_degrees: tuple[int, ...]
    out_degrees: tuple[int, ...]

    @property
    def n_a(self) -> int:
        return len(self.arcs)

    def weight(self, tail: int, head: int) -> float:
        for a in self.arcs:
            if a.tail == tail and a.head == head:
                return a.weight
        raise KeyError((tail, head))


@dataclass(frozen=True)
class DirectedCycle:
    """An elementary directed cycle.

    ``vertices`` is the closed walk v_0 .. v_l with v_0 == v_l, written
    from its smallest vertex; ``weights[k]`` is the flow on the arc
    (vertices[k], vertices[k+1]).
    """

    vertices: tuple[int, ...]
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.vertices) < 3 or self.vertices[0] != self.vertices[-1]:
            raise ModelError("cycle must be a closed walk of positive length")
        interior = self.vertices[:-1]
        if len(set(interior)) != len(interior):
            raise ModelError("cycle vertices must be distinct")
        if len(self.weights) != len(self.vertices) - 1:
            raise ModelError("need one weight per arc")

    @property
    def length(self) -> int:
        return len(self.vertices) - 1

    @property
    def arcs(self) -> tuple[tuple[int, int], ...]:
        return tuple(zip(self.vertices[:-1], self.vertices[1:]))


# ---------------------------------------------------------------------------

#: Scalar report fields in canonical (CSV column) order.
SCALAR_FIELDS = (
    "lambda_ga",
    "lambda_gr",
    "lambda_ha",
    "lambda_hr",
    "lambda_aa",
    "lambda_ar",
    "lambda_c",
    "lambda_y",
    "lambda_s",
    "lambda_d",
    "theta_s",
    "theta_f",
    "theta_d",
)


@dataclass(frozen=True)
class IndicatorReport:
    """All circularity and auxiliary indicators of one matrix.

    Quantities that are undefined for the given matrix (for example the
    directionality ratio when the lower triangle is all zero) are None
    and named in ``flags``.
    """

    lambda_ga: float | None
    lambda_gr: float
    lambda_ha: float | None
    lambda_hr: float
    lambda_aa: float | None
    lambda_ar: float
    lambda_c: float
    lambda_y: int
    lambda_s: float
    lambda_d: float | None
    theta_s: float
    theta_f: float
    theta_d: float | None
    theta_a: tuple[float, ...]
    flags: tuple[str, ...] = ()

    def scalar_values(self) -> tuple[float | None, ...]:
        return tuple(getattr(self, name) for name in SCALAR_FIELDS)
