"""Extended relational model (basic / vector / sequence columns) and the
order-preserving operators used for video analysis.

Relations are columnar-typed but row-stored. ``r2a`` groups a relation on a
basic column and turns every other column into a sequence ordered by the
assumed-order column, one row per group. The remaining operators are closed
over these two shapes so they compose:

* ``smatch`` - similarity condition between two equal-dimension vectors,
  normalized into [0, 1] for both metrics (cosine via (1-cos)/2, euclidean
  via d/(d+1)).
* ``cct`` - compress each sequence to its first/last element (reverting the
  column kind) or to [first, last].
* ``cjoin`` - per group pair, scan element pairs in order and emit the first
  match only, then stop scanning that pair.
* ``cct_join`` - compress both sides with ``cct``, then join exhaustively.
* ``direction`` - compass sector (8 sectors of 45 degrees, screen-up = N) of
  the displacement between two elements of a bounding-box sequence, with
  "Stationary" for sub-threshold displacement.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ConfigError, DimensionError, ParseError
from .trace import BoundingBox, DetectionRecord

NUMERIC = "numeric"
CATEGORICAL = "categorical"

DIRECTIONS = ("E", "NE", "N", "NW", "W", "SW", "S", "SE")
STATIONARY = "Stationary"
DEFAULT_DIRECTION_EPSILON = 1.0  # pixels


# ---------------------------------------------------------------------------
# column kinds
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class BasicKind:
    domain: str  # NUMERIC or CATEGORICAL


@dataclass(frozen=True, slots=True)
class VectorKind:
    dim: int | None = None  # None: dimension free (inside sequences)


@dataclass(frozen=True, slots=True)
class SequenceKind:
    element: BasicKind | VectorKind


Kind = BasicKind | VectorKind | SequenceKind


@dataclass(slots=True)
class RppRelation:
    schema: tuple[tuple[str, Kind], ...]
    rows: list[tuple]

    def column_index(self, name: str) -> int:
        for i, (col, _) in enumerate(self.schema):
            if col == name:
                return i
        raise ConfigError(f"no column named {name!r}")

    def kind_of(self, name: str) -> Kind:
        return self.schema[self.column_index(name)][1]

    def column(self, name: str) -> list:
        idx = self.column_index(name)
        return [row[idx] for row in self.rows]


@dataclass(slots=True)
class ArrableRelation:
    """An RppRelation grouped on ``gba``; all other columns are sequences
    ordered by the ``aoa`` attribute (itself kept as a sequence column)."""

    schema: tuple[tuple[str, Kind], ...]
    rows: list[tuple]
    gba: str
    aoa: str

    def column_index(self, name: str) -> int:
        for i, (col, _) in enumerate(self.schema):
            if col == name:
                return i
        raise ConfigError(f"no column named {name!r}")

    def kind_of(self, name: str) -> Kind:
        return self.schema[self.column_index(name)][1]

    @property
    def group_count(self) -> int:
        return len(self.rows)


# ---------------------------------------------------------------------------
# similarity matching
# ---------------------------------------------------------------------------

def smatch(
    fv_a: Sequence[float], fv_b: Sequence[float], metric: str = "cosine"
) -> float:
    """Similarity distance in [0, 1]; 0 means identical vectors."""
    a = np.asarray(fv_a, dtype=float)
    b = np.asarray(fv_b, dtype=float)
    if a.shape != b.shape:
        raise DimensionError(f"vector dimensions differ: {a.shape} vs {b.shape}")
    if np.array_equal(a, b):
        return 0.0  # exact zero on identical inputs, immune to rounding
    if metric == "cosine":
        na = float(np.linalg.norm(a))
        nb = float(np.linalg.norm(b))
        if na == 0.0 and nb == 0.0:
            return 0.0
        if na == 0.0 or nb == 0.0:
            cos = 0.0
        else:
            cos = float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))
        return (1.0 - cos) / 2.0
    if metric == "euclidean":
        d = float(np.linalg.norm(a - b))
        return d / (d + 1.0)
    raise ConfigError(f"unknown metric {metric!r}")


_OPS: dict[str, Callable[[float, float], bool]] = {
    "<": lambda x, t: x < t,
    "<=": lambda x, t: x <= t,
    ">": lambda x, t: x > t,
    ">=": lambda x, t: x >= t,
    "==": lambda x, t: x == t,
}


@dataclass(frozen=True, slots=True)
class SMatchCondition:
    """``smatch(left.col, right.col) <op> threshold`` plus an optional extra
    predicate over the two group keys."""

    left_column: str
    right_column: str
    threshold: float
    metric: str = "cosine"
    op: str = "<="
    key_predicate: Callable[[object, object], bool] | None = None

    def __post_init__(self):
        if self.op not in _OPS:
            raise ConfigError(f"unknown comparison operator {self.op!r}")

    def matches(self, left_value, right_value) -> bool:
        return _OPS[self.op](smatch(left_value, right_value, self.metric), self.threshold)


# ---------------------------------------------------------------------------
# R2A
# ---------------------------------------------------------------------------

def r2a(rel: RppRelation, gba: str, aoa: str) -> ArrableRelation:
    """Group on ``gba`` and order every other column by ``aoa`` (stable)."""
    for name in (gba, aoa):
        if not isinstance(rel.kind_of(name), BasicKind):
            raise ConfigError(f"{name!r} must be a basic column")
    gi = rel.column_index(gba)
    ai = rel.column_index(aoa)
    groups: dict[object, list[tuple]] = {}
    for row in rel.rows:
        groups.setdefault(row[gi], []).append(row)
    schema: list[tuple[str, Kind]] = []
    for name, kind in rel.schema:
        if name == gba:
            schema.append((name, kind))
        elif isinstance(kind, VectorKind):
            schema.append((name, SequenceKind(VectorKind(None))))
        else:
            schema.append((name, SequenceKind(kind)))
    rows: list[tuple] = []
    for key in sorted(groups):
        members = sorted(groups[key], key=lambda row: row[ai])  # stable on ties
        row = []
        for i, (name, _) in enumerate(rel.schema):
            if name == gba:
                row.append(key)
            else:
                row.append(tuple(m[i] for m in members))
        rows.append(tuple(row))
    return ArrableRelation(schema=tuple(schema), rows=rows, gba=gba, aoa=aoa)


# ---------------------------------------------------------------------------
# CCT
# ---------------------------------------------------------------------------

def cct(arel: ArrableRelation, option: str = "first") -> RppRelation | ArrableRelation:
    """Compress sequences to first/last (reverting kinds) or [first, last]."""
    if option not in ("first", "last", "both"):
        raise ConfigError(f"cct option must be first/last/both, got {option!r}")
    seq_cols = [
        i for i, (_, kind) in enumerate(arel.schema) if isinstance(kind, SequenceKind)
    ]
    if option == "both":
        rows = []
        for row in arel.rows:
            new_row = list(row)
            for i in seq_cols:
                seq = row[i]
                new_row[i] = seq if len(seq) <= 1 else (seq[0], seq[-1])
            rows.append(tuple(new_row))
        return ArrableRelation(schema=arel.schema, rows=rows, gba=arel.gba, aoa=arel.aoa)
    pick = 0 if option == "first" else -1
    schema = tuple(
        (name, kind.element if isinstance(kind, SequenceKind) else kind)
        for name, kind in arel.schema
    )
    rows = []
    for row in arel.rows:
        new_row = list(row)
        for i in seq_cols:
            new_row[i] = row[i][pick]
        rows.append(tuple(new_row))
    return RppRelation(schema=schema, rows=rows)


# ---------------------------------------------------------------------------
# joins
# ---------------------------------------------------------------------------

@dataclass(slots=True)
class JoinResult:
    relation: RppRelation
    comparisons: int


def _join_schema(
    left: ArrableRelation, right: ArrableRelation, condition: SMatchCondition
) -> tuple[tuple[str, Kind], ...]:
    left_elem = left.kind_of(condition.left_column)
    right_elem = right.kind_of(condition.right_column)
    if isinstance(left_elem, SequenceKind):
        left_elem = left_elem.element
    if isinstance(right_elem, SequenceKind):
        right_elem = right_elem.element
    return (
        (f"l_{left.gba}", left.kind_of(left.gba)),
        (f"r_{right.gba}", right.kind_of(right.gba)),
        (f"l_{condition.left_column}", left_elem),
        (f"r_{condition.right_column}", right_elem),
        ("l_pos", BasicKind(NUMERIC)),
        ("r_pos", BasicKind(NUMERIC)),
    )


def _check_sequence_column(rel: ArrableRelation, name: str) -> None:
    if not isinstance(rel.kind_of(name), SequenceKind):
        raise ConfigError(f"join condition needs a sequence column, {name!r} is not")


def cjoin(
    left: ArrableRelation, right: ArrableRelation, condition: SMatchCondition
) -> JoinResult:
    """First-match join: per (left group, right group) pair, compare sequence
    elements left-major and emit one row at the first satisfying pair."""
    _check_sequence_column(left, condition.left_column)
    _check_sequence_column(right, condition.right_column)
    lg = left.column_index(left.gba)
    rg = right.column_index(right.gba)
    lc = left.column_index(condition.left_column)
    rc = right.column_index(condition.right_column)
    rows = []
    comparisons = 0
    for lrow in left.rows:
        for rrow in right.rows:
            if condition.key_predicate is not None and not condition.key_predicate(
                lrow[lg], rrow[rg]
            ):
                continue
            found = False
            for li, lval in enumerate(lrow[lc]):
                for ri, rval in enumerate(rrow[rc]):
                    comparisons += 1
                    if condition.matches(lval, rval):
                        rows.append(
                            (lrow[lg], rrow[rg], lval, rval, li + 1, ri + 1)
                        )
                        found = True
                        break
                if found:
                    break
    return JoinResult(
        relation=RppRelation(schema=_join_schema(left, right, condition), rows=rows),
        comparisons=comparisons,
    )


def exhaustive_join(
    left: ArrableRelation, right: ArrableRelation, condition: SMatchCondition
) -> JoinResult:
    """Regular nested-loop join over all element pairs (one row per match)."""
    _check_sequence_column(left, condition.left_column)
    _check_sequence_column(right, condition.right_column)
    lg = left.column_index(left.gba)
    rg = right.column_index(right.gba)
    lc = left.column_index(condition.left_column)
    rc = right.column_index(condition.right_column)
    rows = []
    comparisons = 0
    for lrow in left.rows:
        for rrow in right.rows:
            if condition.key_predicate is not None and not condition.key_predicate(
                lrow[lg], rrow[rg]
            ):
                continue
            for li, lval in enumerate(lrow[lc]):
                for ri, rval in enumerate(rrow[rc]):
                    comparisons += 1
                    if condition.matches(lval, rval):
                        rows.append((lrow[lg], rrow[rg], lval, rval, li + 1, ri + 1))
    return JoinResult(
        relation=RppRelation(schema=_join_schema(left, right, condition), rows=rows),
        comparisons=comparisons,
    )


def cct_join(
    left: ArrableRelation,
    right: ArrableRelation,
    condition: SMatchCondition,
    option: str = "both",
) -> JoinResult:
    """Compress both inputs with ``cct`` first, then join exhaustively; with
    option=both that is at most four element comparisons per group pair."""
    left_c = cct(left, option)
    right_c = cct(right, option)
    if option == "both":
        return exhaustive_join(left_c, right_c, condition)
    # first/last collapse sequences to plain columns; wrap each value back
    # into a one-element sequence so the join machinery applies unchanged
    def wrap(rel: RppRelation, src: ArrableRelation) -> ArrableRelation:
        seq_cols = [
            i
            for i, (name, _) in enumerate(rel.schema)
            if isinstance(src.kind_of(name), SequenceKind)
        ]
        rows = [
            tuple((val,) if i in seq_cols else val for i, val in enumerate(row))
            for row in rel.rows
        ]
        schema = tuple(
            (name, SequenceKind(kind) if i in seq_cols else kind)
            for i, (name, kind) in enumerate(rel.schema)
        )
        return ArrableRelation(schema=schema, rows=rows, gba=src.gba, aoa=src.aoa)

    return exhaustive_join(wrap(left_c, left), wrap(right_c, right), condition)


# ---------------------------------------------------------------------------
# direction
# ---------------------------------------------------------------------------

def _as_centroid(element) -> tuple[float, float]:
    if isinstance(element, BoundingBox):
        return element.centroid
    vals = tuple(float(v) for v in element)
    if len(vals) == 4:
        return ((vals[0] + vals[2]) / 2.0, (vals[1] + vals[3]) / 2.0)
    if len(vals) == 2:
        return vals
    raise ConfigError(f"cannot take a centroid of {element!r}")


def direction(
    bb_sequence: Sequence,
    i: int | None = None,
    j: int | None = None,
    epsilon: float = DEFAULT_DIRECTION_EPSILON,
) -> str:
    """Compass sector of the displacement between elements i and j (1-based,
    defaulting to first and last). Image y grows downward, so N is up."""
    n = len(bb_sequence)
    if n < 2:
        raise ConfigError("direction needs a sequence of at least 2 elements")
    i = 1 if i is None else i
    j = n if j is None else j
    if not 1 <= i < j <= n:
        raise ConfigError(f"need 1 <= i < j <= {n}, got i={i}, j={j}")
    x0, y0 = _as_centroid(bb_sequence[i - 1])
    x1, y1 = _as_centroid(bb_sequence[j - 1])
    dx = x1 - x0
    dy = y0 - y1  # flip into math coordinates: positive = screen-up = N
    if math.hypot(dx, dy) < epsilon:
        return STATIONARY
    angle = math.degrees(math.atan2(dy, dx))
    # boundary angles (22.5 + 45k) belong to the lower-angle sector; snap
    # near-boundary values so computed angles a few ulps off stay stable
    q = (angle - 22.5) / 45.0
    nearest = round(q)
    if abs(q - nearest) < 1e-9:
        q = nearest
    return DIRECTIONS[math.ceil(q) % 8]


# ---------------------------------------------------------------------------
# bridges and JSON form
# ---------------------------------------------------------------------------

def records_to_relation(records: Iterable[DetectionRecord]) -> RppRelation:
    """DetectionRecord stream -> rows of (fid, oid, cl, clc, bb, fv, ts)."""
    rows = []
    fv_dim: int | None = None
    for r in records:
        if r.fv:
            fv_dim = len(r.fv)
        rows.append(
            (
                r.fid,
                r.oid,
                r.cl,
                r.clc,
                (r.bb.x_min, r.bb.y_min, r.bb.x_max, r.bb.y_max),
                r.fv,
                f"{r.ts[0]}:{r.ts[1]}",
            )
        )
    schema = (
        ("fid", BasicKind(NUMERIC)),
        ("oid", BasicKind(NUMERIC)),
        ("cl", BasicKind(CATEGORICAL)),
        ("clc", BasicKind(NUMERIC)),
        ("bb", VectorKind(4)),
        ("fv", VectorKind(fv_dim)),
        ("ts", BasicKind(CATEGORICAL)),
    )
    return RppRelation(schema=schema, rows=rows)


def _kind_to_obj(kind: Kind) -> dict:
    if isinstance(kind, BasicKind):
        return {"basic": kind.domain}
    if isinstance(kind, VectorKind):
        return {"vector": kind.dim}
    return {"sequence": _kind_to_obj(kind.element)}


def _kind_from_obj(obj: dict) -> Kind:
    if "basic" in obj:
        return BasicKind(obj["basic"])
    if "vector" in obj:
        return VectorKind(obj["vector"])
    if "sequence" in obj:
        element = _kind_from_obj(obj["sequence"])
        if isinstance(element, SequenceKind):
            raise ParseError("sequences cannot nest")
        return SequenceKind(element)
    raise ParseError(f"unknown column kind {obj!r}")


def _value_to_obj(value):
    if isinstance(value, tuple):
        return [_value_to_obj(v) for v in value]
    return value


def _value_from_obj(value):
    if isinstance(value, list):
        return tuple(_value_from_obj(v) for v in value)
    return value


def relation_to_obj(rel: RppRelation | ArrableRelation) -> dict:
    obj: dict = {
        "version": 1,
        "schema": [{"name": name, "kind": _kind_to_obj(kind)} for name, kind in rel.schema],
        "rows": [[_value_to_obj(v) for v in row] for row in rel.rows],
    }
    if isinstance(rel, ArrableRelation):
        obj["gba"] = rel.gba
        obj["aoa"] = rel.aoa
    return obj


def relation_from_obj(obj: dict) -> RppRelation | ArrableRelation:
    schema = tuple(
        (col["name"], _kind_from_obj(col["kind"])) for col in obj["schema"]
    )
    rows = [tuple(_value_from_obj(v) for v in row) for row in obj["rows"]]
    if "gba" in obj:
        return ArrableRelation(schema=schema, rows=rows, gba=obj["gba"], aoa=obj["aoa"])
    return RppRelation(schema=schema, rows=rows)


def load_relation(path) -> RppRelation | ArrableRelation:
    with open(path, "r", encoding="utf-8") as fh:
        return relation_from_obj(json.load(fh))


def save_relation(rel: RppRelation | ArrableRelation, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(relation_to_obj(rel), fh, indent=2)
        fh.write("\n")
