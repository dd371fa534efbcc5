"""Trace data model and the post-processed raw data file (RDF) format.

An RDF file is UTF-8 text. ``#``-prefixed lines form the header (one
``key<TAB>value`` pair per line), ``//``-prefixed lines are comments, and a
final ``#columns`` line introduces the tab-separated data section. Each data
row describes one (frame, object) detection:

    fid  oid  cl  clc  bb  fv  pv  pcv  ts

Vectors are serialized as ``[v1,v2,...]`` with shortest round-trip decimal
floats; an absent pose is ``[]``. The composite timestamp renders as
``fid:oid_ts`` where ``oid_ts`` is the 1-based rank of the row within its
frame. Files written by :func:`write_rdf` are byte-deterministic, so
parse -> write -> parse is a fixpoint.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Iterator, Sequence

from .errors import DimensionError, OrderError, ParseError

COLUMNS = ("fid", "oid", "cl", "clc", "bb", "fv", "pv", "pcv", "ts")

_CHAR_KEYS = (
    "video_id",
    "length_seconds",
    "frames",
    "fps",
    "width",
    "height",
    "generated",
    "pipeline",
    "th_track",
)
_META_KEYS = (
    "max_objs",
    "min_objs",
    "avg_objs",
    "nonempty_frames",
    "unique_oids",
    "uo",
    "oi",
    "min_duration",
    "max_obj_frames",
    "min_obj_frames",
)


@dataclass(frozen=True, slots=True)
class BoundingBox:
    """Axis-aligned box in pixel coordinates; origin top-left, y grows down."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"degenerate bounding box {self}")

    @property
    def centroid(self) -> tuple[float, float]:
        return ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min


@dataclass(frozen=True, slots=True)
class DetectionRecord:
    """One row of the trace: an object observed in a frame."""

    fid: int
    oid: int
    cl: str
    clc: float
    bb: BoundingBox
    fv: tuple[float, ...]
    pv: tuple[float, ...] | None = None
    pcv: tuple[float, ...] | None = None
    ts: tuple[int, int] = (0, 0)  # (fid_ts, oid_ts); fid_ts must equal fid

    @property
    def centroid(self) -> tuple[float, float]:
        return self.bb.centroid


@dataclass(frozen=True, slots=True)
class VideoCharacteristics:
    """Per-video header fields recorded by the extraction pipeline."""

    video_id: str
    length_seconds: float
    frame_count: int
    fps: int
    width: int
    height: int
    generated: str = ""
    pipeline: str = ""
    th_track: int = 0  # 0 means "whole video"
    extra_header: tuple[str, ...] = ()  # unknown '#' lines, kept verbatim
    comments: tuple[str, ...] = ()  # '//' lines, kept verbatim

    def effective_th_track(self) -> int:
        return self.th_track if self.th_track >= 1 else self.frame_count


@dataclass(frozen=True, slots=True)
class TraceMeta:
    """Aggregates over the whole trace, computed once and reused everywhere."""

    max_objs: int
    min_objs: int
    avg_objs: float
    nonempty_frames: int
    unique_oids: tuple[int, ...]  # ascending
    uo: int
    oi: int
    min_duration: int
    max_obj_frames: tuple[int, ...]
    min_obj_frames: tuple[int, ...]

    @staticmethod
    def empty() -> "TraceMeta":
        return TraceMeta(0, 0, 0.0, 0, (), 0, 0, 0, (), ())


# ---------------------------------------------------------------------------
# serialization helpers
# ---------------------------------------------------------------------------

def format_float(value: float) -> str:
    """Shortest decimal string that round-trips to the same float."""
    return repr(float(value))


def format_vector(values: Sequence[float] | None) -> str:
    if not values:
        return "[]"
    return "[" + ",".join(format_float(v) for v in values) + "]"


def parse_vector(text: str, line_number: int | None = None) -> tuple[float, ...]:
    text = text.strip()
    if not (text.startswith("[") and text.endswith("]")):
        raise ParseError(f"expected bracketed vector, got {text!r}", line_number)
    inner = text[1:-1].strip()
    if not inner:
        return ()
    try:
        return tuple(float(tok) for tok in inner.split(","))
    except ValueError as exc:
        raise ParseError(f"non-numeric vector element in {text!r}", line_number) from exc


def _format_int_list(values: Sequence[int]) -> str:
    return ",".join(str(v) for v in values)


def _parse_int_list(text: str) -> tuple[int, ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(int(tok) for tok in text.split(","))


def record_to_row(record: DetectionRecord) -> str:
    bb = record.bb
    return "\t".join(
        (
            str(record.fid),
            str(record.oid),
            record.cl,
            format_float(record.clc),
            format_vector((bb.x_min, bb.y_min, bb.x_max, bb.y_max)),
            format_vector(record.fv),
            format_vector(record.pv),
            format_vector(record.pcv),
            f"{record.ts[0]}:{record.ts[1]}",
        )
    )


def row_to_record(row: str, line_number: int | None = None) -> DetectionRecord:
    parts = row.split("\t")
    if len(parts) != len(COLUMNS):
        raise ParseError(
            f"expected {len(COLUMNS)} columns, got {len(parts)}", line_number
        )
    try:
        fid = int(parts[0])
        oid = int(parts[1])
        clc = float(parts[3])
    except ValueError as exc:
        raise ParseError(f"non-numeric id/confidence in row {row!r}", line_number) from exc
    bb_vals = parse_vector(parts[4], line_number)
    if len(bb_vals) != 4:
        raise ParseError(f"bounding box needs 4 values, got {len(bb_vals)}", line_number)
    try:
        bb = BoundingBox(*bb_vals)
    except ValueError as exc:
        raise ParseError(str(exc), line_number) from exc
    fv = parse_vector(parts[5], line_number)
    pv = parse_vector(parts[6], line_number) or None
    pcv = parse_vector(parts[7], line_number) or None
    ts_parts = parts[8].split(":")
    if len(ts_parts) != 2:
        raise ParseError(f"timestamp must be fid:oid_ts, got {parts[8]!r}", line_number)
    try:
        ts = (int(ts_parts[0]), int(ts_parts[1]))
    except ValueError as exc:
        raise ParseError(f"non-numeric timestamp {parts[8]!r}", line_number) from exc
    return DetectionRecord(fid, oid, parts[2], clc, bb, fv, pv, pcv, ts)


# ---------------------------------------------------------------------------
# meta computation
# ---------------------------------------------------------------------------

def iter_frames(records: Iterable[DetectionRecord]) -> Iterator[tuple[int, list[DetectionRecord]]]:
    """Group a frame-ordered record stream into (fid, records) batches."""
    current: list[DetectionRecord] = []
    current_fid: int | None = None
    for record in records:
        if current_fid is None or record.fid == current_fid:
            current.append(record)
            current_fid = record.fid
        else:
            yield current_fid, current
            current = [record]
            current_fid = record.fid
    if current_fid is not None:
        yield current_fid, current


def compute_meta(records: Iterable[DetectionRecord]) -> TraceMeta:
    """Derive TraceMeta from a frame-ordered record stream."""
    counts: dict[int, int] = {}
    oid_frames: dict[int, set[int]] = {}
    oi = 0
    for record in records:
        counts[record.fid] = counts.get(record.fid, 0) + 1
        oid_frames.setdefault(record.oid, set()).add(record.fid)
        oi += 1
    if not counts:
        return TraceMeta.empty()
    max_objs = max(counts.values())
    min_objs = min(counts.values())
    nonempty = len(counts)
    unique = tuple(sorted(oid_frames))
    min_duration = min(len(frames) for frames in oid_frames.values())
    return TraceMeta(
        max_objs=max_objs,
        min_objs=min_objs,
        avg_objs=oi / nonempty,
        nonempty_frames=nonempty,
        unique_oids=unique,
        uo=len(unique),
        oi=oi,
        min_duration=min_duration,
        max_obj_frames=tuple(sorted(f for f, n in counts.items() if n == max_objs)),
        min_obj_frames=tuple(sorted(f for f, n in counts.items() if n == min_objs)),
    )


def verify_meta(meta: TraceMeta, records: Iterable[DetectionRecord]) -> bool:
    """Cross-check a header-supplied meta block against the records."""
    return compute_meta(records) == meta


# ---------------------------------------------------------------------------
# header serialization
# ---------------------------------------------------------------------------

def _chars_lines(chars: VideoCharacteristics) -> list[str]:
    return [
        f"#video_id\t{chars.video_id}",
        f"#length_seconds\t{format_float(chars.length_seconds)}",
        f"#frames\t{chars.frame_count}",
        f"#fps\t{chars.fps}",
        f"#width\t{chars.width}",
        f"#height\t{chars.height}",
        f"#generated\t{chars.generated}",
        f"#pipeline\t{chars.pipeline}",
        f"#th_track\t{chars.th_track}",
    ]


def _meta_lines(meta: TraceMeta) -> list[str]:
    return [
        f"#max_objs\t{meta.max_objs}",
        f"#min_objs\t{meta.min_objs}",
        f"#avg_objs\t{format_float(meta.avg_objs)}",
        f"#nonempty_frames\t{meta.nonempty_frames}",
        f"#unique_oids\t{_format_int_list(meta.unique_oids)}",
        f"#uo\t{meta.uo}",
        f"#oi\t{meta.oi}",
        f"#min_duration\t{meta.min_duration}",
        f"#max_obj_frames\t{_format_int_list(meta.max_obj_frames)}",
        f"#min_obj_frames\t{_format_int_list(meta.min_obj_frames)}",
    ]


def header_lines(chars: VideoCharacteristics, meta: TraceMeta) -> list[str]:
    lines = _chars_lines(chars) + _meta_lines(meta)
    lines.extend(chars.extra_header)
    lines.extend(chars.comments)
    return lines


class _HeaderAccumulator:
    """Collects '#'/'//' header lines and materializes chars + meta."""

    def __init__(self):
        self.values: dict[str, str] = {}
        self.extra: list[str] = []
        self.comments: list[str] = []

    def feed(self, line: str) -> None:
        if line.startswith("//"):
            self.comments.append(line)
            return
        body = line[1:]
        key, _, value = body.partition("\t")
        if key == "columns":
            return  # structural line, regenerated on write
        if key in _CHAR_KEYS or key in _META_KEYS:
            self.values[key] = value
        else:
            self.extra.append(line)

    def build_chars(self) -> VideoCharacteristics:
        v = self.values
        missing = [k for k in ("video_id", "frames", "fps", "width", "height") if k not in v]
        if missing:
            raise ParseError(f"header missing required keys: {', '.join(missing)}")
        return VideoCharacteristics(
            video_id=v["video_id"],
            length_seconds=float(v.get("length_seconds", "0")),
            frame_count=int(v["frames"]),
            fps=int(v["fps"]),
            width=int(v["width"]),
            height=int(v["height"]),
            generated=v.get("generated", ""),
            pipeline=v.get("pipeline", ""),
            th_track=int(v.get("th_track", "0")),
            extra_header=tuple(self.extra),
            comments=tuple(self.comments),
        )

    def build_meta(self) -> TraceMeta | None:
        v = self.values
        if any(k not in v for k in _META_KEYS):
            return None
        return TraceMeta(
            max_objs=int(v["max_objs"]),
            min_objs=int(v["min_objs"]),
            avg_objs=float(v["avg_objs"]),
            nonempty_frames=int(v["nonempty_frames"]),
            unique_oids=_parse_int_list(v["unique_oids"]),
            uo=int(v["uo"]),
            oi=int(v["oi"]),
            min_duration=int(v["min_duration"]),
            max_obj_frames=_parse_int_list(v["max_obj_frames"]),
            min_obj_frames=_parse_int_list(v["min_obj_frames"]),
        )


# ---------------------------------------------------------------------------
# parse / write
# ---------------------------------------------------------------------------

def parse_rdf(path) -> tuple[VideoCharacteristics, TraceMeta, list[DetectionRecord]]:
    """Parse an RDF file into (characteristics, meta, frame-ordered records).

    Meta is taken from the header when every meta key is present, otherwise it
    is computed from the records.
    """
    header = _HeaderAccumulator()
    records: list[DetectionRecord] = []
    fv_dim: int | None = None
    prev_fid = 0
    rank = 0
    with open(path, "r", encoding="utf-8") as fh:
        for line_number, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            if line.startswith("#") or line.startswith("//"):
                header.feed(line)
                continue
            record = row_to_record(line, line_number)
            if record.fid < prev_fid:
                raise ParseError(
                    f"frame {record.fid} out of order after {prev_fid}", line_number
                )
            if record.fid != prev_fid:
                prev_fid = record.fid
                rank = 0
            rank += 1
            if record.ts != (record.fid, rank):
                raise ParseError(
                    f"timestamp {record.ts[0]}:{record.ts[1]} does not match "
                    f"expected {record.fid}:{rank}",
                    line_number,
                )
            if record.fv:
                if fv_dim is None:
                    fv_dim = len(record.fv)
                elif len(record.fv) != fv_dim:
                    raise DimensionError(
                        f"feature vector dimension {len(record.fv)} != {fv_dim} "
                        f"on line {line_number}"
                    )
            records.append(record)
    chars = header.build_chars()
    meta = header.build_meta()
    if meta is None:
        meta = compute_meta(records)
    return chars, meta, records


def write_rdf(
    path,
    chars: VideoCharacteristics,
    meta: TraceMeta,
    records: Iterable[DetectionRecord],
) -> None:
    """Write an RDF file with deterministic bytes for identical input."""
    lines = header_lines(chars, meta)
    lines.append("#columns\t" + "\t".join(COLUMNS))
    prev_key: tuple[int, int] | None = None
    for record in records:
        key = (record.fid, record.ts[1])
        if prev_key is not None and key <= prev_key:
            raise OrderError(f"records not sorted by (fid, oid_ts) at {key}")
        prev_key = key
        lines.append(record_to_row(record))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def assign_timestamps(records: Iterable[DetectionRecord]) -> list[DetectionRecord]:
    """Stamp (fid_ts, oid_ts) on frame-ordered records, ranking within frames."""
    out: list[DetectionRecord] = []
    for fid, batch in iter_frames(records):
        for rank, record in enumerate(batch, start=1):
            out.append(replace(record, ts=(fid, rank)))
    return out
