"""Explicit Runge-Kutta methods stored as Butcher tableaus.

Only the coefficient matrix ``a`` (strictly lower triangular) and the weights
``b`` are kept.  Nodes ``c_i = sum_j a_ij`` are derived on demand because the
systems integrated here are autonomous.

Tableau files are JSON documents::

    {"stages": 2, "order": 2, "a": [[], [0.5]], "b": [0.0, 1.0]}

Row ``i`` of ``a`` lists ``a_{i,1..i-1}``, so the first row is empty.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ButcherTableau",
    "TableauError",
    "TableauParseError",
    "ExplicitnessError",
    "ConsistencyError",
    "euler_tableau",
    "midpoint_tableau",
    "kutta3_tableau",
    "rk4_classic_tableau",
    "fehlberg5_tableau",
    "builtin_tableaus",
    "tableau_for_order",
    "parse_tableau",
    "serialize_tableau",
    "load_tableau",
]

WEIGHT_SUM_TOL = 1e-12


class TableauError(ValueError):
    pass


class TableauParseError(TableauError):
    def __init__(self, field_name, message):
        super().__init__(f"field {field_name!r}: {message}")
        self.field = field_name


class ExplicitnessError(TableauError):
    pass


class ConsistencyError(TableauError):
    pass


@dataclass(frozen=True, eq=False)
class ButcherTableau:
    """Coefficients of an explicit S-stage Runge-Kutta method.

    ``a`` is an ``(S, S)`` array whose entries on and above the diagonal are
    zero; ``b`` holds the ``S`` combination weights.  Arrays are copied and
    made read-only on construction.
    """

    a: np.ndarray
    b: np.ndarray
    claimed_order: int
    name: str = field(default="custom")

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        b = np.array(self.b, dtype=float).ravel()
        s = b.size
        if s == 0:
            raise TableauError("tableau needs at least one stage")
        if a.size == 0 and s == 1:
            a = np.zeros((1, 1))
        if a.shape != (s, s):
            raise TableauError(f"a must be {s}x{s}, got shape {a.shape}")
        if np.any(np.triu(a) != 0.0):
            i, j = np.argwhere(np.triu(a) != 0.0)[0]
            raise ExplicitnessError(
                f"a[{i + 1}][{j + 1}] = {a[i, j]!r} lies on or above the diagonal"
            )
        if not np.all(np.isfinite(a)) or not np.all(np.isfinite(b)):
            raise TableauError("coefficients must be finite")
        if abs(float(np.sum(b)) - 1.0) > WEIGHT_SUM_TOL:
            raise ConsistencyError(f"weights sum to {float(np.sum(b))!r}, expected 1")
        if int(self.claimed_order) < 1:
            raise TableauError("claimed_order must be >= 1")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "claimed_order", int(self.claimed_order))

    @property
    def stages(self) -> int:
        return self.b.size

    @property
    def c(self) -> np.ndarray:
        return self.a.sum(axis=1)

    def __eq__(self, other):
        if not isinstance(other, ButcherTableau):
            return NotImplemented
        return (
            self.claimed_order == other.claimed_order
            and np.array_equal(self.a, other.a)
            and np.array_equal(self.b, other.b)
        )

    def __hash__(self):
        return hash((self.claimed_order, self.a.tobytes(), self.b.tobytes()))

    def __repr__(self):
        return f"ButcherTableau(name={self.name!r}, stages={self.stages}, order={self.claimed_order})"


def _lower(rows, s):
    a = np.zeros((s, s))
    for i, row in enumerate(rows):
        a[i, : len(row)] = row
    return a


def euler_tableau() -> ButcherTableau:
    return ButcherTableau(np.zeros((1, 1)), [1.0], 1, name="euler")


def midpoint_tableau() -> ButcherTableau:
    return ButcherTableau(_lower([[], [0.5]], 2), [0.0, 1.0], 2, name="midpoint")


def kutta3_tableau() -> ButcherTableau:
    """Kutta's third-order method."""
    return ButcherTableau(
        _lower([[], [0.5], [-1.0, 2.0]], 3), [1 / 6, 2 / 3, 1 / 6], 3, name="kutta3"
    )


def rk4_classic_tableau() -> ButcherTableau:
    return ButcherTableau(
        _lower([[], [0.5], [0.0, 0.5], [0.0, 0.0, 1.0]], 4),
        [1 / 6, 1 / 3, 1 / 3, 1 / 6],
        4,
        name="rk4",
    )


def fehlberg5_tableau() -> ButcherTableau:
    """Six-stage fifth-order solution of the Runge-Kutta-Fehlberg pair."""
    rows = [
        [],
        [1 / 4],
        [3 / 32, 9 / 32],
        [1932 / 2197, -7200 / 2197, 7296 / 2197],
        [439 / 216, -8.0, 3680 / 513, -845 / 4104],
        [-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40],
    ]
    b = [16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55]
    return ButcherTableau(_lower(rows, 6), b, 5, name="fehlberg5")


def builtin_tableaus() -> dict[str, ButcherTableau]:
    tabs = [
        euler_tableau(),
        midpoint_tableau(),
        kutta3_tableau(),
        rk4_classic_tableau(),
        fehlberg5_tableau(),
    ]
    return {t.name: t for t in tabs}


def tableau_for_order(order: int) -> ButcherTableau:
    for tab in builtin_tableaus().values():
        if tab.claimed_order == order:
            return tab
    raise TableauError(f"no built-in tableau of order {order}")


def _number(value, field_name):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TableauParseError(field_name, f"expected a number, got {value!r}")
    return float(value)


def parse_tableau(text: str) -> ButcherTableau:
    """Build a validated tableau from its JSON text form."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TableauParseError("<document>", f"invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise TableauParseError("<document>", "expected a mapping at top level")
    for key in ("stages", "order", "a", "b"):
        if key not in doc:
            raise TableauParseError(key, "missing")

    stages, order = doc["stages"], doc["order"]
    if isinstance(stages, bool) or not isinstance(stages, int) or stages < 1:
        raise TableauParseError("stages", f"expected a positive integer, got {stages!r}")
    if isinstance(order, bool) or not isinstance(order, int) or order < 1:
        raise TableauParseError("order", f"expected a positive integer, got {order!r}")

    b_raw = doc["b"]
    if not isinstance(b_raw, list) or len(b_raw) != stages:
        raise TableauParseError("b", f"expected a list of {stages} numbers")
    b = [_number(v, "b") for v in b_raw]

    a_raw = doc["a"]
    if not isinstance(a_raw, list) or len(a_raw) != stages:
        raise TableauParseError("a", f"expected {stages} rows")
    a = np.zeros((stages, stages))
    for i, row in enumerate(a_raw):
        if not isinstance(row, list):
            raise TableauParseError("a", f"row {i + 1} is not a list")
        if len(row) > stages:
            raise TableauParseError("a", f"row {i + 1} has {len(row)} entries, more than {stages}")
        for j, v in enumerate(row):
            a[i, j] = _number(v, "a")
    name = doc.get("name", "custom")
    return ButcherTableau(a, b, order, name=str(name))


def serialize_tableau(tableau: ButcherTableau) -> str:
    rows = [[float(v) for v in tableau.a[i, :i]] for i in range(tableau.stages)]
    doc = {
        "name": tableau.name,
        "stages": tableau.stages,
        "order": tableau.claimed_order,
        "a": rows,
        "b": [float(v) for v in tableau.b],
    }
    return json.dumps(doc, indent=2)


def load_tableau(path) -> ButcherTableau:
    with open(path, encoding="utf-8") as fh:
        return parse_tableau(fh.read())
