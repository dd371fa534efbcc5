"""Graph models and situation detection over tracked-object video traces."""

from .approach import (
    ApproachConfig,
    ApproachOutput,
    choose_k,
    compose_approach,
    count_instances,
    detect_sgf,
    detect_sgv,
)
from .build import build_models
from .clustering import Clustering, elbow, kmeans, silhouette_scaled, simple_cluster
from .groups import (
    ClusterOutput,
    HeuristicConfig,
    SizeQuery,
    compose_clustering_results,
    f1_against_baseline,
    gc_heuristic,
    histogram_of_objects,
    update_output_clusters,
    vertex_traversal,
)
from .rpp import ArrableRelation, RppRelation, cct, cct_join, cjoin, direction, r2a, smatch
from .synth import GroundTruth, ScenarioSpec, generate, synthesize
from .trace import (
    BoundingBox,
    DetectionRecord,
    TraceMeta,
    VideoCharacteristics,
    compute_meta,
    parse_rdf,
    write_rdf,
)

__version__ = "0.1.0"
