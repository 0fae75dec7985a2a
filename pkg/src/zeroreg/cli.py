"""Command line interface: synth, register, eval, inspect.

Exit codes: 0 success, 1 validation/usage error, 2 runtime failure. With
--json the only stdout output is one machine-readable document; human
summaries go to stdout otherwise and logging always goes to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import pipeline as pl
from . import synthgen
from .bundle import read_bundle
from .errors import ConfigError, FormatError, StageFailure, ValidationError, ZeroRegError
from .graph import build_scene_graph, cross_similarity
from .projection import build_masked_cloud

log = logging.getLogger("zeroreg")

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="zeroreg",
        description="Zero-shot point-cloud registration over scene bundles.",
        epilog="Option precedence: command-line flag > config file > built-in default.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate synthetic benchmark pairs")
    p_synth.add_argument("--spec", help="suite spec JSON (defaults to the built-in suite)")
    p_synth.add_argument("--out", required=True, help="output suite directory")
    p_synth.add_argument("--pairs", type=int, help="pair count (default: spec file value or 10)")
    p_synth.add_argument("--seed", type=int, help="overrides the suite file's base seed")
    p_synth.add_argument("--json", action="store_true")

    p_reg = sub.add_parser("register", help="register a source bundle onto a target bundle")
    p_reg.add_argument("--source", required=True)
    p_reg.add_argument("--target", required=True)
    p_reg.add_argument("--config", help="pipeline config JSON")
    p_reg.add_argument("--out", required=True, help="report JSON path")
    p_reg.add_argument("--json", action="store_true")

    p_eval = sub.add_parser("eval", help="evaluate a suite of pairs with ground truth")
    p_eval.add_argument("--suite", required=True)
    p_eval.add_argument("--config")
    p_eval.add_argument("--out", required=True, help="summary JSON path (per-pair CSV written next to it)")
    p_eval.add_argument("--jobs", type=int, default=1)
    p_eval.add_argument("--json", action="store_true")

    p_ins = sub.add_parser("inspect", help="validate a bundle; optionally dump graph/correspondence CSVs")
    p_ins.add_argument("--bundle", required=True)
    p_ins.add_argument("--target", help="second bundle for cross-similarity / correspondences")
    p_ins.add_argument("--dump-graph", action="store_true")
    p_ins.add_argument("--dump-corr", action="store_true")
    p_ins.add_argument("--config")
    p_ins.add_argument("--out", help="CSV output path (required with a dump flag)")
    p_ins.add_argument("--json", action="store_true")
    return parser


def _load_config(path: str | None) -> pl.PipelineConfig:
    if path is None:
        return pl.PipelineConfig()
    return pl.config_from_file(path)


def _emit(doc: dict, as_json: bool, human: str) -> None:
    if as_json:
        print(json.dumps(doc, indent=2))
    else:
        print(human)


def _cmd_synth(args) -> int:
    suite = synthgen.default_suite_spec()
    if args.spec:
        try:
            user = json.loads(Path(args.spec).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read suite spec {args.spec}: {exc}") from exc
        known = set(synthgen.default_suite_spec()) | {"pairs"}
        unknown = set(user) - known
        if unknown:
            raise ConfigError(f"unknown suite spec keys: {sorted(unknown)}")
        suite.update(user)
    if args.seed is not None:
        suite["seed"] = args.seed
    spec_pairs = int(suite.pop("pairs", 10))
    pairs = args.pairs if args.pairs is not None else spec_pairs
    written = synthgen.generate_suite(args.out, suite, pairs)
    doc = {"pairs": len(written), "out": str(args.out), "seed": suite["seed"]}
    _emit(doc, args.json, f"wrote {len(written)} pairs to {args.out}")
    return 0


def _cmd_register(args) -> int:
    cfg = _load_config(args.config)
    source = read_bundle(args.source)
    target = read_bundle(args.target)
    try:
        report = pl.register_pair(source, target, cfg)
    except StageFailure as exc:
        doc = {"failure": {"stage": exc.stage, "error": str(exc.cause)}}
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(json.dumps(doc, indent=2), encoding="utf-8")
        _emit(doc, args.json, f"registration failed in stage '{exc.stage}': {exc.cause}")
        return 2
    doc = report.to_dict()
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(json.dumps(doc, indent=2), encoding="utf-8")
    row = " ".join(f"{v:.6f}" for v in report.transform.to_row12())
    human = (
        f"transform [R|t]: {row}\n"
        f"object pairs: {len(report.object_pairs)}, point pairs: {len(report.point_pairs)}, "
        f"inliers: {report.diagnostics.get('ransac_inliers')}"
    )
    _emit(doc, args.json, human)
    return 0


def _cmd_eval(args) -> int:
    cfg = _load_config(args.config)
    pairs = pl.discover_suite(args.suite)
    if not pairs:
        raise ValidationError(f"no pair_* directories with gt.json under {args.suite}")
    summary, records = pl.evaluate_suite(pairs, cfg, jobs=max(1, args.jobs))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(summary, indent=2), encoding="utf-8")
    csv_path = out.with_suffix(".pairs.csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(
            fh,
            fieldnames=[
                "pair", "status", "registered", "rmse", "inlier_ratio",
                "rotation_error", "translation_error", "stage", "error",
            ],
        )
        writer.writeheader()
        for rec in records:
            writer.writerow({k: rec.get(k, "") for k in writer.fieldnames})
    human = (
        f"rr={summary['rr']:.4f} mean_ir={summary['mean_ir']:.4f} "
        f"re_mean={summary['re_mean']:.3f}deg te_mean={summary['te_mean']:.4f}m "
        f"pairs={summary['pairs']} failures={summary['failures']}"
    )
    _emit(summary, args.json, human)
    return 0


def _cmd_inspect(args) -> int:
    cfg = _load_config(args.config)
    bundle = read_bundle(args.bundle)
    doc = {
        "bundle_id": bundle.bundle_id,
        "frames": len(bundle.frames),
        "masks": len(bundle.masks),
        "semantic_features": len(bundle.semantic_features),
        "geometric_sets": len(bundle.geometric),
        "valid": True,
    }
    if args.dump_graph or args.dump_corr:
        if not args.out:
            raise ConfigError("--out is required with --dump-graph/--dump-corr")
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        if args.dump_graph:
            cloud, _, _ = build_masked_cloud(bundle, cfg.projection)
            graph = build_scene_graph(cloud, k=cfg.k_neighbors)
            with open(out, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["kind", "i", "j", "value"])
                n = len(graph.node_labels)
                for i in range(n):
                    for j in range(n):
                        writer.writerow(["affinity", i, j, f"{graph.affinity[i, j]:.8f}"])
                if args.target:
                    other = read_bundle(args.target)
                    ocloud, _, _ = build_masked_cloud(other, cfg.projection)
                    ograph = build_scene_graph(ocloud, k=cfg.k_neighbors)
                    C = cross_similarity(graph.node_semantics, ograph.node_semantics)
                    for i in range(C.shape[0]):
                        for j in range(C.shape[1]):
                            writer.writerow(["cross_similarity", i, j, f"{C[i, j]:.8f}"])
            doc["dumped"] = str(out)
        else:
            if not args.target:
                raise ConfigError("--dump-corr requires --target")
            other = read_bundle(args.target)
            report = pl.register_pair(bundle, other, cfg)
            with open(out, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["source_index", "target_index", "confidence", "region_id"])
                pc = report.point_pairs
                for (a, b), conf, rid in zip(pc.pairs.tolist(), pc.confidence, pc.region_ids):
                    writer.writerow([a, b, f"{conf:.8f}", rid])
            doc["dumped"] = str(out)
    human = (
        f"bundle {bundle.bundle_id}: {doc['frames']} frames, {doc['masks']} masks, "
        f"{doc['semantic_features']} features, {doc['geometric_sets']} descriptor sets (valid)"
    )
    _emit(doc, args.json, human)
    return 0


_COMMANDS = {"synth": _cmd_synth, "register": _cmd_register, "eval": _cmd_eval, "inspect": _cmd_inspect}


def run(argv=None) -> int:
    level = _LOG_LEVELS.get(os.environ.get("ZEROREG_LOG", "warn").lower(), logging.WARNING)
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, FormatError, ValidationError) as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ZeroRegError as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
