"""Network and report file formats.

A network file is a JSON document::

    {
      "n_v": 4,
      "stocks": [{"const": 10}, ...],              // one entry per vertex
      "flows": [{"from": 1, "to": 2, "entry": {"expr": "abs(sin(pi*t))"}}, ...],
      "time": {"start": 0, "end": 2, "steps": 201},   // optional
      "labels": ["mine", "plant", ...],               // optional
      "integrated": true                              // optional marker
    }

An entry object carries exactly one of:

    {"const": 1.3}
    {"expr": "abs(cos(pi*t))"}
    {"dist": {"kind": "uniform", "params": [3, 5]}}
    {"table": {"times": [...], "values": [...]}}

Vertices are 1-indexed.  Unknown keys are rejected so typos fail loudly.
Mass-balance imposition writes the corrected network back in the same
format with tabulated stocks and ``"integrated": true``.

Report JSON mirrors :class:`~circnet.model.IndicatorReport` with explicit
nulls plus a ``flags`` array; trajectory CSV uses the fixed header
``t,lambda_ga,...,theta_d,theta_a_1..theta_a_n`` with 17 significant
digits and empty fields for undefined values.
"""

from __future__ import annotations

import json
from typing import Any

from . import expr
from .model import (
    Constant,
    Distribution,
    Entry,
    Expression,
    FlowEntry,
    IndicatorReport,
    NetworkSpec,
    SCALAR_FIELDS,
    Tabulated,
    TimeWindow,
)


class NetworkFileError(ValueError):
    """The document is well-formed JSON but not a valid network file."""


def _require_keys(obj: dict, allowed: set[str], required: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise NetworkFileError(f"{where}: unknown key(s) {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise NetworkFileError(f"{where}: missing key(s) {sorted(missing)}")


def _number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise NetworkFileError(f"{where}: expected a number, got {value!r}")
    return float(value)


def parse_entry(obj: Any, where: str) -> Entry:
    if not isinstance(obj, dict) or len(obj) != 1:
        raise NetworkFileError(
            f"{where}: an entry is an object with exactly one of "
            "'const', 'expr', 'dist', 'table'"
        )
    (kind, payload), = obj.items()
    if kind == "const":
        return Constant(_number(payload, where))
    if kind == "expr":
        if not isinstance(payload, str):
            raise NetworkFileError(f"{where}: 'expr' takes a string")
        try:
            return Expression.parse(payload)
        except expr.ExpressionError as exc:
            raise NetworkFileError(f"{where}: {exc}") from exc
    if kind == "dist":
        _require_keys(payload if isinstance(payload, dict) else {}, {"kind", "params"},
                      {"kind", "params"}, where)
        params = payload["params"]
        if not isinstance(params, list):
            raise NetworkFileError(f"{where}: 'params' takes an array")
        return Distribution(
            kind=payload["kind"],
            params=tuple(_number(p, where) for p in params),
        )
    if kind == "table":
        _require_keys(payload if isinstance(payload, dict) else {}, {"times", "values"},
                      {"times", "values"}, where)
        return Tabulated(
            times=tuple(_number(t, where) for t in payload["times"]),
            values=tuple(_number(v, where) for v in payload["values"]),
        )
    raise NetworkFileError(f"{where}: unknown entry kind {kind!r}")


def parse_network(obj: Any) -> NetworkSpec:
    if not isinstance(obj, dict):
        raise NetworkFileError("top level: expected an object")
    _require_keys(
        obj,
        allowed={"n_v", "stocks", "flows", "time", "labels", "integrated"},
        required={"n_v", "stocks", "flows"},
        where="top level",
    )
    n_v = obj["n_v"]
    if isinstance(n_v, bool) or not isinstance(n_v, int):
        raise NetworkFileError("top level: 'n_v' must be an integer")
    if not isinstance(obj["stocks"], list):
        raise NetworkFileError("'stocks' must be an array")
    stocks = tuple(
        parse_entry(e, f"stocks[{k}]") for k, e in enumerate(obj["stocks"])
    )
    if not isinstance(obj["flows"], list):
        raise NetworkFileError("'flows' must be an array")
    flows = []
    for k, f in enumerate(obj["flows"]):
        where = f"flows[{k}]"
        if not isinstance(f, dict):
            raise NetworkFileError(f"{where}: expected an object")
        _require_keys(f, {"from", "to", "entry"}, {"from", "to", "entry"}, where)
        if isinstance(f["from"], bool) or not isinstance(f["from"], int):
            raise NetworkFileError(f"{where}: 'from' must be an integer")
        if isinstance(f["to"], bool) or not isinstance(f["to"], int):
            raise NetworkFileError(f"{where}: 'to' must be an integer")
        flows.append(
            FlowEntry(tail=f["from"], head=f["to"], entry=parse_entry(f["entry"], where))
        )
    window = None
    if "time" in obj:
        t = obj["time"]
        _require_keys(t if isinstance(t, dict) else {}, {"start", "end", "steps"},
                      {"start", "end", "steps"}, "'time'")
        if isinstance(t["steps"], bool) or not isinstance(t["steps"], int):
            raise NetworkFileError("'time': 'steps' must be an integer")
        window = TimeWindow(
            start=_number(t["start"], "'time'"),
            end=_number(t["end"], "'time'"),
            steps=t["steps"],
        )
    labels = None
    if "labels" in obj:
        if not isinstance(obj["labels"], list) or not all(
            isinstance(s, str) for s in obj["labels"]
        ):
            raise NetworkFileError("'labels' must be an array of strings")
        labels = tuple(obj["labels"])
    return NetworkSpec(
        n_v=n_v, stocks=stocks, flows=flows, time_window=window, vertex_labels=labels
    )


def load_network(path: str) -> NetworkSpec:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise NetworkFileError(f"{path}: invalid JSON at offset {exc.pos}: {exc.msg}") from exc
    return parse_network(obj)


def entry_to_obj(entry: Entry) -> dict:
    if isinstance(entry, Constant):
        return {"const": entry.value}
    if isinstance(entry, Expression):
        return {"expr": entry.source}
    if isinstance(entry, Distribution):
        return {"dist": {"kind": entry.kind, "params": list(entry.params)}}
    return {"table": {"times": list(entry.times), "values": list(entry.values)}}


def network_to_obj(spec: NetworkSpec, integrated: bool = False) -> dict:
    obj: dict[str, Any] = {
        "n_v": spec.n_v,
        "stocks": [entry_to_obj(e) for e in spec.stocks],
        "flows": [
            {"from": f.tail, "to": f.head, "entry": entry_to_obj(f.entry)}
            for f in spec.flows
        ],
    }
    if spec.time_window is not None:
        obj["time"] = {
            "start": spec.time_window.start,
            "end": spec.time_window.end,
            "steps": spec.time_window.steps,
        }
    if spec.vertex_labels is not None:
        obj["labels"] = list(spec.vertex_labels)
    if integrated:
        obj["integrated"] = True
    return obj


def report_to_obj(report: IndicatorReport) -> dict:
    obj: dict[str, Any] = {name: getattr(report, name) for name in SCALAR_FIELDS}
    obj["theta_a"] = list(report.theta_a)
    obj["flags"] = list(report.flags)
    return obj


def dump_json(obj: Any) -> str:
    """Deterministic JSON: fixed key order, LF newline at the end."""
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def format_value(value: float | None) -> str:
    """17 significant digits; undefined values become empty fields."""
    if value is None:
        return ""
    return format(value, ".17g")


def csv_header(n_v: int) -> str:
    return ",".join(
        ["t", *SCALAR_FIELDS, *[f"theta_a_{k}" for k in range(1, n_v + 1)]]
    )


def trajectory_csv(samples: list[tuple[float, IndicatorReport]], n_v: int) -> str:
    """RFC-4180 style CSV (all fields numeric or empty), LF line endings."""
    lines = [csv_header(n_v)]
    for t, report in samples:
        fields = [format_value(t)]
        fields += [format_value(v) for v in report.scalar_values()]
        fields += [format_value(v) for v in report.theta_a]
        lines.append(",".join(fields))
    return "\n".join(lines) + "\n"
