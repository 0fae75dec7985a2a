"""End-to-end registration pipeline and benchmark-suite evaluation.

Chains projection, scene graphs, object matching, point matching, and RANSAC
behind a single config whose toggles reproduce the ablation variants:
object level off (global matching), scene graph off (similarity-only object
matching), semantics off (constant vectors), category filter off, single-view
mode, directed affinity, and hard category constraints.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import _kernels, metrics
from .bundle import SceneBundle, read_bundle
from .errors import ConfigError, StageFailure, ZeroRegError
from .graph import build_scene_graph, cross_similarity
from .object_match import (
    AssignmentMatrix,
    ObjectCorrespondences,
    filter_by_category,
    greedy_similarity_match,
    solve_qap,
)
from .point_match import PointCorrespondences, match_points
from .projection import (
    MaskedPointCloud,
    PointDescriptorCloud,
    ProjectionConfig,
    ProjectionDiagnostics,
    build_descriptor_cloud,
    build_masked_cloud,
)
from .registration import RansacConfig, RigidTransform, ransac_register
from .synthgen import GroundTruth, read_ground_truth

_CATEGORY_PENALTY = 1e6


@dataclass
class PipelineToggles:
    use_object_level: bool = True
    use_scene_graph: bool = True
    use_semantics: bool = True
    use_category_filter: bool = True
    single_view_mode: bool = False
    directed_affinity: bool = False
    category_hard_constraint: bool = False


@dataclass
class PipelineConfig:
    k_neighbors: int = 3
    sinkhorn_iterations: int = 20
    sinkhorn_temperature: float = 0.1
    gamma: float = 0.05
    seed: int = 0
    ransac: RansacConfig = field(default_factory=RansacConfig)
    projection: ProjectionConfig = field(default_factory=ProjectionConfig)
    toggles: PipelineToggles = field(default_factory=PipelineToggles)

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ConfigError("k_neighbors must be >= 1")
        if self.sinkhorn_iterations < 1:
            raise ConfigError("sinkhorn_iterations must be >= 1")
        if self.sinkhorn_temperature <= 0:
            raise ConfigError("sinkhorn_temperature must be positive")
        if not (0.0 <= self.gamma <= 1.0):
            raise ConfigError("gamma must lie in [0, 1]")


def _build_nested(cls, doc: dict, where: str):
    allowed = {f.name for f in fields(cls)}
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown {where} keys: {sorted(unknown)}")
    return cls(**doc)


def config_from_dict(doc: dict) -> PipelineConfig:
    """Builds a config from a JSON document; unknown keys are rejected."""
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    doc = dict(doc)
    kwargs = {}
    if "ransac" in doc:
        kwargs["ransac"] = _build_nested(RansacConfig, doc.pop("ransac"), "ransac")
    if "projection" in doc:
        kwargs["projection"] = _build_nested(ProjectionConfig, doc.pop("projection"), "projection")
    if "toggles" in doc:
        kwargs["toggles"] = _build_nested(PipelineToggles, doc.pop("toggles"), "toggles")
    simple = {f.name for f in fields(PipelineConfig)} - {"ransac", "projection", "toggles"}
    unknown = set(doc) - simple
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs.update(doc)
    try:
        return PipelineConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def config_from_file(path) -> PipelineConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(doc)


def config_to_dict(cfg: PipelineConfig) -> dict:
    return {
        "k_neighbors": cfg.k_neighbors,
        "sinkhorn_iterations": cfg.sinkhorn_iterations,
        "sinkhorn_temperature": cfg.sinkhorn_temperature,
        "gamma": cfg.gamma,
        "seed": cfg.seed,
        "ransac": {f.name: getattr(cfg.ransac, f.name) for f in fields(RansacConfig)},
        "projection": {f.name: getattr(cfg.projection, f.name) for f in fields(ProjectionConfig)},
        "toggles": {f.name: getattr(cfg.toggles, f.name) for f in fields(PipelineToggles)},
    }


@dataclass
class RegistrationReport:
    transform: RigidTransform
    object_pairs: list[tuple[int, int]]
    point_pairs: PointCorrespondences
    stage_timings: dict[str, float]  # milliseconds
    diagnostics: dict
    source_cloud: MaskedPointCloud | None = None
    target_cloud: MaskedPointCloud | None = None

    def to_dict(self) -> dict:
        return {
            "transform": self.transform.to_row12(),
            "object_pairs": [[int(a), int(b)] for a, b in self.object_pairs],
            "point_pairs": [
                [int(a), int(b), float(c)]
                for (a, b), c in zip(self.point_pairs.pairs.tolist(), self.point_pairs.confidence)
            ],
            "stage_timings_ms": self.stage_timings,
            "diagnostics": self.diagnostics,
        }


class _StageClock:
    def __init__(self):
        self.timings: dict[str, float] = {}

    def run(self, stage: str, fn, *args, **kwargs):
        start = time.perf_counter()
        try:
            result = fn(*args, **kwargs)
        except ZeroRegError as exc:
            raise StageFailure(stage, exc) from exc
        self.timings[stage] = (time.perf_counter() - start) * 1e3
        return result


def _constant_semantics(cloud: MaskedPointCloud) -> MaskedPointCloud:
    dim = len(cloud.objects[0].semantic)
    const = np.zeros(dim)
    const[0] = 1.0
    objs = [replace(r, semantic=const.copy()) for r in cloud.objects]
    return MaskedPointCloud(objects=objs, all_points=cloud.all_points)


def _match_objects(
    source: MaskedPointCloud, target: MaskedPointCloud, cfg: PipelineConfig
) -> tuple[ObjectCorrespondences, AssignmentMatrix]:
    tg = cfg.toggles
    if not tg.use_semantics:
        source = _constant_semantics(source)
        target = _constant_semantics(target)
    gp = build_scene_graph(source, k=cfg.k_neighbors, symmetric=not tg.directed_affinity)
    gq = build_scene_graph(target, k=cfg.k_neighbors, symmetric=not tg.directed_affinity)
    C = cross_similarity(gp.node_semantics, gq.node_semantics)
    if tg.category_hard_constraint:
        mismatch = np.array(
            [[lp != lq for lq in gq.node_labels] for lp in gp.node_labels], dtype=np.float64
        )
        C = C - _CATEGORY_PENALTY * mismatch
    if tg.use_scene_graph:
        assignment = solve_qap(gp.affinity, gq.affinity, C)
    else:
        assignment = greedy_similarity_match(C)
    if tg.use_category_filter:
        corr = filter_by_category(assignment, gp.node_labels, gq.node_labels)
    else:
        corr = ObjectCorrespondences(pairs=assignment.pairs())
    return corr, assignment


def register_pair(
    source: SceneBundle, target: SceneBundle, config: PipelineConfig | None = None
) -> RegistrationReport:
    """Full chain source -> target; raises StageFailure naming a failed stage."""
    cfg = config or PipelineConfig()
    clock = _StageClock()
    tg = cfg.toggles
    proj_cfg = replace(cfg.projection, single_view_mode=tg.single_view_mode)
    diagnostics: dict = {"kernel_backend": _kernels.BACKEND}

    if tg.use_object_level:
        def _project_both():
            sc, sd, sdiag = build_masked_cloud(source, proj_cfg)
            tc, td, tdiag = build_masked_cloud(target, proj_cfg)
            return sc, sd, sdiag, tc, td, tdiag

        src_cloud, src_desc, src_diag, tgt_cloud, tgt_desc, tgt_diag = clock.run(
            "projection", _project_both
        )
        diagnostics["source_regions"] = len(src_cloud.objects)
        diagnostics["target_regions"] = len(tgt_cloud.objects)
        diagnostics["dropped_pixels"] = src_diag.dropped_pixels + tgt_diag.dropped_pixels
        diagnostics["source_projection_report"] = src_diag.report()
        diagnostics["target_projection_report"] = tgt_diag.report()
        object_corr, assignment = clock.run("object_matching", _match_objects, src_cloud, tgt_cloud, cfg)
        diagnostics["qap_objective"] = assignment.objective
        diagnostics["object_pairs"] = object_corr.count
    else:
        def _project_desc():
            return (
                build_descriptor_cloud(source, cfg.projection.merge_radius),
                build_descriptor_cloud(target, cfg.projection.merge_radius),
            )

        src_desc, tgt_desc = clock.run("projection", _project_desc)
        src_cloud = tgt_cloud = None
        object_corr = ObjectCorrespondences(pairs=[])
        diagnostics["object_pairs"] = 0

    diagnostics["source_descriptor_points"] = len(src_desc.points)
    diagnostics["target_descriptor_points"] = len(tgt_desc.points)

    point_corr = clock.run(
        "point_matching",
        match_points,
        object_corr,
        src_desc,
        tgt_desc,
        iterations=cfg.sinkhorn_iterations,
        temperature=cfg.sinkhorn_temperature,
        gamma=cfg.gamma,
        fallback_global=True,
    )
    diagnostics["point_pairs"] = len(point_corr)
    diagnostics["global_fallback"] = bool(len(point_corr) and (point_corr.region_ids == -1).any())

    ransac_cfg = replace(cfg.ransac, seed=cfg.seed + cfg.ransac.seed)
    result = clock.run("registration", ransac_register, point_corr, ransac_cfg)

    # Consensus rescue: object-level ambiguity (duplicate instances in small
    # scenes make same-category nodes structurally interchangeable) can leave
    # every region pair wrong. Weak consensus triggers one object-agnostic
    # global matching pass; the result with more inliers wins.
    weak = len(result.inlier_indices) < max(6, 0.5 * len(point_corr))
    if weak and tg.use_object_level and not diagnostics["global_fallback"]:
        global_corr = match_points(
            ObjectCorrespondences(pairs=[]),
            src_desc,
            tgt_desc,
            iterations=cfg.sinkhorn_iterations,
            temperature=cfg.sinkhorn_temperature,
            gamma=cfg.gamma,
            fallback_global=True,
        )
        diagnostics["consensus_rescue"] = True
        if len(global_corr) >= 3:
            try:
                alt = ransac_register(global_corr, ransac_cfg)
            except ZeroRegError:
                alt = None
            if alt is not None and len(alt.inlier_indices) > len(result.inlier_indices):
                result = alt
                point_corr = global_corr
                diagnostics["consensus_rescue_used"] = True
    diagnostics["ransac_inliers"] = int(len(result.inlier_indices))
    diagnostics["ransac_iterations"] = int(result.iterations_run)

    return RegistrationReport(
        transform=result.transform,
        object_pairs=list(object_corr.pairs),
        point_pairs=point_corr,
        stage_timings=clock.timings,
        diagnostics=diagnostics,
        source_cloud=src_cloud,
        target_cloud=tgt_cloud,
    )


@dataclass
class SuitePair:
    name: str
    source: SceneBundle | str | Path
    target: SceneBundle | str | Path
    ground_truth: GroundTruth | None = None


def discover_suite(suite_dir) -> list[SuitePair]:
    """Finds pair_* directories holding source/, target/, gt.json."""
    suite_dir = Path(suite_dir)
    out = []
    for pair_dir in sorted(suite_dir.glob("pair_*")):
        if (pair_dir / "gt.json").is_file():
            out.append(
                SuitePair(
                    name=pair_dir.name,
                    source=pair_dir / "source",
                    target=pair_dir / "target",
                    ground_truth=None,
                )
            )
    return out


def _bundle_of(item) -> SceneBundle:
    if isinstance(item, SceneBundle):
        return item
    return read_bundle(item)


def _evaluate_one(pair: SuitePair, cfg: PipelineConfig) -> dict:
    record: dict = {"pair": pair.name}
    try:
        gt = pair.ground_truth
        if gt is None:
            gt = read_ground_truth(Path(str(pair.source)).parent)
        src = _bundle_of(pair.source)
        tgt = _bundle_of(pair.target)
        report = register_pair(src, tgt, cfg)
        ev = metrics.evaluate_pair(
            report.transform, gt.transform, gt.overlap_points, report.point_pairs
        )
        record.update(
            status="ok",
            rmse=ev.rmse,
            registered=ev.registered,
            inlier_ratio=ev.inlier_ratio,
            rotation_error=ev.rotation_error,
            translation_error=ev.translation_error,
        )
        record["_eval"] = ev
    except StageFailure as exc:
        record.update(status="failed", stage=exc.stage, error=str(exc.cause))
    except ZeroRegError as exc:
        record.update(status="failed", stage="load", error=str(exc))
    return record


def evaluate_suite(
    pairs: list[SuitePair], config: PipelineConfig | None = None, jobs: int = 1
) -> tuple[dict, list[dict]]:
    """Per-pair evaluation plus aggregate summary; failures stay in the denominator."""
    if not pairs:
        raise ConfigError("evaluate_suite: empty suite")
    cfg = config or PipelineConfig()
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(lambda p: _evaluate_one(p, cfg), pairs))
    else:
        records = [_evaluate_one(p, cfg) for p in pairs]
    evals = [r.pop("_eval") for r in records if r["status"] == "ok"]
    for r in records:
        r.pop("_eval", None)
    failures = sum(1 for r in records if r["status"] != "ok")
    summary = metrics.summarize(evals, failures=failures)
    return summary, records
