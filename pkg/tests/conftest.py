from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tracegraph.build import BuildResult, build_models
from tracegraph.synth import ObjectScript, PlantedSituation, ScenarioSpec, synthesize
from tracegraph.trace import write_rdf

FIXTURES = Path(__file__).parent.parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


def linear_script(
    oid: int,
    start: tuple[float, float],
    end: tuple[float, float],
    enter: int = 1,
    exit: int = 100,
    cl: str = "person",
    bbox_size: tuple[float, float] = (40.0, 80.0),
) -> ObjectScript:
    return ObjectScript(
        oid=oid,
        cl=cl,
        enter=enter,
        exit=exit,
        waypoints=((enter, start), (exit, end)),
        bbox_size=bbox_size,
    )


def stable_group_spec(frame_count: int = 120, extras: int = 2) -> ScenarioSpec:
    """A tight quartet drifting together plus `extras` far-away loners."""
    group = [
        linear_script(1, (100.0, 100.0), (140.0, 120.0), exit=frame_count),
        linear_script(2, (130.0, 100.0), (170.0, 120.0), exit=frame_count),
        linear_script(3, (100.0, 140.0), (140.0, 160.0), exit=frame_count),
        linear_script(4, (130.0, 140.0), (170.0, 160.0), exit=frame_count),
    ]
    loner_homes = [(1100.0, 650.0), (500.0, 650.0), (1100.0, 250.0), (700.0, 450.0)]
    loners = [
        linear_script(
            10 + i,
            loner_homes[i],
            (loner_homes[i][0] - 40.0, loner_homes[i][1] - 30.0),
            exit=frame_count,
        )
        for i in range(extras)
    ]
    return ScenarioSpec(
        video_id="SG1",
        frame_count=frame_count,
        fps=30,
        width=1280,
        height=720,
        objects=tuple(group + loners),
        situations=(
            PlantedSituation(
                kind="group", frames=(1, frame_count), oids=(1, 2, 3, 4), size=4, radius=60.0
            ),
        ),
    )


def random_scenario(seed: int, frame_count: int | None = None) -> ScenarioSpec:
    """Seeded scenario with clustered trajectories for the property and
    acceptance suites; per-frame object counts stay modest so exhaustive
    baselines remain fast."""
    rng = np.random.default_rng(seed)
    frame_count = frame_count or int(rng.integers(300, 1200))
    n_objects = int(rng.integers(3, 21))
    n_anchors = int(rng.integers(2, 5))
    anchors = rng.uniform((150, 150), (1100, 600), size=(n_anchors, 2))
    objects = []
    for oid in range(1, n_objects + 1):
        enter = int(rng.integers(1, max(2, frame_count // 2)))
        exit_ = min(int(rng.integers(enter + frame_count // 4, frame_count + 1)), frame_count)
        anchor = anchors[int(rng.integers(0, n_anchors))]
        start = anchor + rng.uniform(-40, 40, size=2)
        end = anchor + rng.uniform(-40, 40, size=2)
        objects.append(
            ObjectScript(
                oid=oid,
                cl="person",
                enter=enter,
                exit=exit_,
                waypoints=(
                    (enter, (float(start[0]), float(start[1]))),
                    (exit_, (float(end[0]), float(end[1]))),
                ),
            )
        )
    return ScenarioSpec(
        video_id=f"R{seed}",
        frame_count=frame_count,
        fps=30,
        width=1280,
        height=720,
        objects=tuple(objects),
    )


def materialize(
    spec: ScenarioSpec, seed: int, root: Path, **build_kwargs
) -> tuple[BuildResult, list]:
    """Synthesize, write the RDF, build models; returns (result, records)."""
    chars, meta, records, _ = synthesize(spec, seed)
    rdf = root / f"{spec.video_id}_{seed}.rdf"
    write_rdf(rdf, chars, meta, records)
    build_kwargs.setdefault("max_graph", 1)
    out = root / f"graphs_{spec.video_id}_{seed}"
    suffix = "_".join(f"{k}{v}" for k, v in sorted(build_kwargs.items()))
    if suffix:
        out = root / f"graphs_{spec.video_id}_{seed}_{suffix}"
    return build_models(rdf, out, **build_kwargs), records


@pytest.fixture()
def tmp_trace(tmp_path):
    def make(spec: ScenarioSpec, seed: int = 7, **build_kwargs) -> BuildResult:
        return materialize(spec, seed, tmp_path, **build_kwargs)[0]

    return make
