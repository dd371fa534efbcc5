"""Synthetic trace generator with machine-readable planted ground truth.

Scenarios script object trajectories as waypoint lists (linearly
interpolated), optional noise (bounding-box jitter, detection misses,
id switches), and a list of planted situations. Generation is a pure
function of (scenario, seed): the RNG is numpy's PCG64 so traces reproduce
bit-for-bit anywhere the same numpy stream is available. Jitter translates
both box corners identically, so box sizes are noise-invariant and only
centroids move.

Scenario and ground-truth documents are versioned JSON; their schemas ship
in tracegraph/schemas/.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable

import jsonschema
import numpy as np

from .errors import ScenarioError
from .trace import (
    BoundingBox,
    DetectionRecord,
    TraceMeta,
    VideoCharacteristics,
    assign_timestamps,
    compute_meta,
    write_rdf,
)

SPEC_VERSION = 1
DEFAULT_FEATURE_DIM = 16


@dataclass(frozen=True, slots=True)
class ObjectScript:
    oid: int
    cl: str
    enter: int
    exit: int
    waypoints: tuple[tuple[int, tuple[float, float]], ...]  # (frame, centroid)
    bbox_size: tuple[float, float] = (40.0, 80.0)
    feature_seed: int | None = None  # defaults to the oid


@dataclass(frozen=True, slots=True)
class IdSwitch:
    oid: int
    frame: int
    new_oid: int


@dataclass(frozen=True, slots=True)
class NoiseSpec:
    jitter_sigma: float = 0.0
    miss_probability: float = 0.0
    id_switches: tuple[IdSwitch, ...] = ()


@dataclass(frozen=True, slots=True)
class PlantedSituation:
    kind: str  # group | approach | retreat
    frames: tuple[int, int]
    oids: tuple[int, ...]
    size: int | None = None  # group only
    radius: float | None = None  # group only


@dataclass(frozen=True, slots=True)
class ScenarioSpec:
    video_id: str
    frame_count: int
    fps: int
    width: int
    height: int
    objects: tuple[ObjectScript, ...]
    noise: NoiseSpec = NoiseSpec()
    situations: tuple[PlantedSituation, ...] = ()
    feature_dim: int = DEFAULT_FEATURE_DIM


@dataclass(frozen=True, slots=True)
class GroundTruth:
    video_id: str
    groups: tuple[PlantedSituation, ...]
    approaches: tuple[PlantedSituation, ...]
    retreats: tuple[PlantedSituation, ...]


# ---------------------------------------------------------------------------
# JSON documents
# ---------------------------------------------------------------------------

def _schema(name: str) -> dict:
    text = resources.files("tracegraph.schemas").joinpath(name).read_text("utf-8")
    return json.loads(text)


def scenario_from_obj(obj: dict) -> ScenarioSpec:
    jsonschema.validate(obj, _schema("scenario-spec-v1.schema.json"))
    noise_obj = obj.get("noise", {})
    noise = NoiseSpec(
        jitter_sigma=float(noise_obj.get("jitter_sigma", 0.0)),
        miss_probability=float(noise_obj.get("miss_probability", 0.0)),
        id_switches=tuple(
            IdSwitch(int(s["oid"]), int(s["frame"]), int(s["new_oid"]))
            for s in noise_obj.get("id_switches", [])
        ),
    )
    objects = tuple(
        ObjectScript(
            oid=int(o["oid"]),
            cl=o.get("cl", "person"),
            enter=int(o["enter"]),
            exit=int(o["exit"]),
            waypoints=tuple(
                (int(w[0]), (float(w[1][0]), float(w[1][1]))) for w in o["waypoints"]
            ),
            bbox_size=tuple(o.get("bbox_size", (40.0, 80.0))),
            feature_seed=o.get("feature_seed"),
        )
        for o in obj["objects"]
    )
    situations = tuple(
        PlantedSituation(
            kind=s["kind"],
            frames=(int(s["frames"][0]), int(s["frames"][1])),
            oids=tuple(int(x) for x in s["oids"]),
            size=s.get("size"),
            radius=s.get("radius"),
        )
        for s in obj.get("situations", [])
    )
    return ScenarioSpec(
        video_id=obj["video_id"],
        frame_count=int(obj["frame_count"]),
        fps=int(obj["fps"]),
        width=int(obj["width"]),
        height=int(obj["height"]),
        objects=objects,
        noise=noise,
        situations=situations,
        feature_dim=int(obj.get("feature_dim", DEFAULT_FEATURE_DIM)),
    )


def load_scenario(path) -> ScenarioSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return scenario_from_obj(json.load(fh))


def scenario_to_obj(spec: ScenarioSpec) -> dict:
    obj: dict = {
        "version": SPEC_VERSION,
        "video_id": spec.video_id,
        "frame_count": spec.frame_count,
        "fps": spec.fps,
        "width": spec.width,
        "height": spec.height,
        "feature_dim": spec.feature_dim,
        "objects": [
            {
                "oid": o.oid,
                "cl": o.cl,
                "enter": o.enter,
                "exit": o.exit,
                "waypoints": [[f, [p[0], p[1]]] for f, p in o.waypoints],
                "bbox_size": list(o.bbox_size),
                **({"feature_seed": o.feature_seed} if o.feature_seed is not None else {}),
            }
            for o in spec.objects
        ],
    }
    noise = {}
    if spec.noise.jitter_sigma:
        noise["jitter_sigma"] = spec.noise.jitter_sigma
    if spec.noise.miss_probability:
        noise["miss_probability"] = spec.noise.miss_probability
    if spec.noise.id_switches:
        noise["id_switches"] = [
            {"oid": s.oid, "frame": s.frame, "new_oid": s.new_oid}
            for s in spec.noise.id_switches
        ]
    if noise:
        obj["noise"] = noise
    if spec.situations:
        obj["situations"] = [
            {
                "kind": s.kind,
                "frames": list(s.frames),
                "oids": list(s.oids),
                **({"size": s.size} if s.size is not None else {}),
                **({"radius": s.radius} if s.radius is not None else {}),
            }
            for s in spec.situations
        ]
    return obj


def save_scenario(spec: ScenarioSpec, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(scenario_to_obj(spec), fh, indent=2, sort_keys=True)
        fh.write("\n")


def ground_truth_to_obj(gt: GroundTruth) -> dict:
    def items(situations: Iterable[PlantedSituation]) -> list[dict]:
        out = []
        for s in situations:
            entry = {"oids": list(s.oids), "frames": list(s.frames)}
            if s.size is not None:
                entry["size"] = s.size
            if s.radius is not None:
                entry["radius"] = s.radius
            out.append(entry)
        return out

    return {
        "version": SPEC_VERSION,
        "video_id": gt.video_id,
        "groups": items(gt.groups),
        "approaches": items(gt.approaches),
        "retreats": items(gt.retreats),
    }


def load_ground_truth(path) -> GroundTruth:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    jsonschema.validate(obj, _schema("ground-truth-v1.schema.json"))

    def items(kind: str, raw: list[dict]) -> tuple[PlantedSituation, ...]:
        return tuple(
            PlantedSituation(
                kind=kind,
                frames=(int(s["frames"][0]), int(s["frames"][1])),
                oids=tuple(int(x) for x in s["oids"]),
                size=s.get("size"),
                radius=s.get("radius"),
            )
            for s in raw
        )

    return GroundTruth(
        video_id=obj["video_id"],
        groups=items("group", obj.get("groups", [])),
        approaches=items("approach", obj.get("approaches", [])),
        retreats=items("retreat", obj.get("retreats", [])),
    )


# ---------------------------------------------------------------------------
# trajectory evaluation
# ---------------------------------------------------------------------------

def scripted_centroid(script: ObjectScript, fid: int) -> tuple[float, float]:
    """Waypoint-interpolated centroid at a frame (clamped to the ends)."""
    wps = script.waypoints
    if fid <= wps[0][0]:
        return wps[0][1]
    for (f0, p0), (f1, p1) in zip(wps, wps[1:]):
        if f0 <= fid <= f1:
            if f1 == f0:
                return p1
            t = (fid - f0) / (f1 - f0)
            return (p0[0] + t * (p1[0] - p0[0]), p0[1] + t * (p1[1] - p0[1]))
    return wps[-1][1]


def _validate(spec: ScenarioSpec) -> None:
    scripts = {o.oid: o for o in spec.objects}
    if len(scripts) != len(spec.objects):
        raise ScenarioError("duplicate oid in object scripts")
    for o in spec.objects:
        if not 1 <= o.enter <= o.exit <= spec.frame_count:
            raise ScenarioError(f"object {o.oid} span [{o.enter},{o.exit}] out of range")
        if not o.waypoints:
            raise ScenarioError(f"object {o.oid} has no waypoints")
        if list(o.waypoints) != sorted(o.waypoints, key=lambda w: w[0]):
            raise ScenarioError(f"object {o.oid} waypoints not frame-sorted")
    for s in spec.situations:
        a, b = s.frames
        if not 1 <= a <= b <= spec.frame_count:
            raise ScenarioError(f"situation frames [{a},{b}] out of range")
        for oid in s.oids:
            script = scripts.get(oid)
            if script is None:
                raise ScenarioError(f"situation references unknown oid {oid}")
            if script.enter > a or script.exit < b:
                raise ScenarioError(
                    f"oid {oid} absent during planted interval [{a},{b}]"
                )
        if s.kind == "group":
            if s.size is not None and s.size != len(s.oids):
                raise ScenarioError("group size disagrees with member count")
            radius = s.radius if s.radius is not None else 0.0
            if radius <= 0:
                raise ScenarioError("group situations need a positive radius")
            for fid in range(a, b + 1):
                pts = [scripted_centroid(scripts[oid], fid) for oid in s.oids]
                cx = sum(p[0] for p in pts) / len(pts)
                cy = sum(p[1] for p in pts) / len(pts)
                if any(math.dist(p, (cx, cy)) > radius for p in pts):
                    raise ScenarioError(
                        f"group members stray past radius {radius} at frame {fid}"
                    )
        elif s.kind in ("approach", "retreat"):
            if len(s.oids) != 2:
                raise ScenarioError(f"{s.kind} needs exactly two oids")
            p, q = (scripts[oid] for oid in s.oids)
            dists = [
                math.dist(scripted_centroid(p, fid), scripted_centroid(q, fid))
                for fid in range(a, b + 1)
            ]
            deltas = [d1 - d0 for d0, d1 in zip(dists, dists[1:])]
            if s.kind == "approach" and any(d >= 0 for d in deltas):
                raise ScenarioError(
                    f"planted approach {s.oids} not strictly converging on [{a},{b}]"
                )
            if s.kind == "retreat" and any(d <= 0 for d in deltas):
                raise ScenarioError(
                    f"planted retreat {s.oids} not strictly diverging on [{a},{b}]"
                )
        else:
            raise ScenarioError(f"unknown situation kind {s.kind!r}")


def _base_feature(rng_seed: int, dim: int, axis: int) -> np.ndarray:
    """Per-object anchor vector: a distinct axis plus a seeded perturbation,
    so different objects stay far apart in cosine distance while one object's
    per-frame vectors stay close."""
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    v = 0.15 * rng.standard_normal(dim)
    v[axis % dim] += 1.0
    return v / np.linalg.norm(v)


def ground_truth(spec: ScenarioSpec) -> GroundTruth:
    return GroundTruth(
        video_id=spec.video_id,
        groups=tuple(s for s in spec.situations if s.kind == "group"),
        approaches=tuple(s for s in spec.situations if s.kind == "approach"),
        retreats=tuple(s for s in spec.situations if s.kind == "retreat"),
    )


def synthesize(
    spec: ScenarioSpec, seed: int
) -> tuple[VideoCharacteristics, TraceMeta, list[DetectionRecord], GroundTruth]:
    """Deterministically expand a scenario into records plus ground truth."""
    _validate(spec)
    rng = np.random.Generator(np.random.PCG64(seed))
    switches = {(s.oid, s.frame): s.new_oid for s in spec.noise.id_switches}
    active_switch: dict[int, int] = {}
    axis_of = {o.oid: i for i, o in enumerate(sorted(spec.objects, key=lambda o: o.oid))}
    bases = {
        o.oid: _base_feature(
            o.feature_seed if o.feature_seed is not None else o.oid,
            spec.feature_dim,
            axis_of[o.oid],
        )
        for o in spec.objects
    }
    records: list[DetectionRecord] = []
    for fid in range(1, spec.frame_count + 1):
        for script in sorted(spec.objects, key=lambda o: o.oid):
            if not script.enter <= fid <= script.exit:
                continue
            missed = (
                spec.noise.miss_probability > 0.0
                and rng.random() < spec.noise.miss_probability
            )
            jitter = (0.0, 0.0)
            if spec.noise.jitter_sigma > 0.0:
                jx, jy = rng.normal(0.0, spec.noise.jitter_sigma, size=2)
                jitter = (float(jx), float(jy))
            fv = bases[script.oid] + 0.01 * rng.standard_normal(spec.feature_dim)
            if missed:
                continue  # draws above still consumed, keeping streams aligned
            if (script.oid, fid) in switches:
                active_switch[script.oid] = switches[(script.oid, fid)]
            oid = active_switch.get(script.oid, script.oid)
            cx, cy = scripted_centroid(script, fid)
            w, h = script.bbox_size
            # jitter translates the whole box; clamp the translation (not the
            # corners) so the box size stays noise-invariant inside the frame
            cx = min(max(cx + jitter[0], w / 2), spec.width - w / 2)
            cy = min(max(cy + jitter[1], h / 2), spec.height - h / 2)
            bb = BoundingBox(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2)
            fv = fv / np.linalg.norm(fv)
            records.append(
                DetectionRecord(
                    fid=fid,
                    oid=oid,
                    cl=script.cl,
                    clc=0.9,
                    bb=bb,
                    fv=tuple(float(x) for x in fv),
                )
            )
    records.sort(key=lambda r: (r.fid, r.oid))
    records = assign_timestamps(records)
    meta = compute_meta(records)
    chars = VideoCharacteristics(
        video_id=spec.video_id,
        length_seconds=spec.frame_count / spec.fps,
        frame_count=spec.frame_count,
        fps=spec.fps,
        width=spec.width,
        height=spec.height,
        generated="1970-01-01T00:00:00Z",  # fixed: outputs must be reproducible
        pipeline="tracegraph-synthetic",
        th_track=0,
    )
    return chars, meta, records, ground_truth(spec)


def generate(spec: ScenarioSpec, seed: int, rdf_path, gt_path) -> tuple[Path, Path]:
    """Write the RDF trace and ground-truth JSON for (spec, seed)."""
    chars, meta, records, gt = synthesize(spec, seed)
    write_rdf(rdf_path, chars, meta, records)
    with open(gt_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(ground_truth_to_obj(gt), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return Path(rdf_path), Path(gt_path)
