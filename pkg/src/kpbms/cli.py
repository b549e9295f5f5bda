"""Command-line entry point: ``kpbms <subcommand> [options]``.

Subcommands
-----------
saliency     write per-keypoint or per-class attention maps for a dataset split
bboxes       generate box sets (JSON lines) and optional YOLO label files
evaluate     score a box-set file, or freshly generated boxes, against annotations
tune         random or TPE search; writes a trial log and the best config
compare-bms  side-by-side border-seeded BMS vs keypoint-seeded saliency
fixtures     write a synthetic fixture dataset

Exit codes: 0 success, 1 partial dataset failure (unless ``--keep-going``),
2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io as kio
from .bbox import BoxSet
from .fixtures import make_fixture_set
from .generation import DEFAULT_LIMIT, generate
from .metrics import aggregate, evaluate, format_table
from .saliency import SaliencyConfig, bms_saliency, job_rng, saliency_for_keypoint, saliency_for_seeds, saliency_per_class
from .tuner import SearchSpace, random_search, tpe_search, write_trial_log

log = logging.getLogger("kpbms")


def _global_options(suppress: bool) -> argparse.ArgumentParser:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--config", type=Path, default=d(None), help="key=value config file")
    g.add_argument("--seed", type=int, default=d(None), help="random seed (overrides config)")
    g.add_argument("--jobs", type=int, default=d(1), help="parallel worker processes")
    g.add_argument("--deterministic", action="store_true", default=d(False),
                   help="evenly spaced thresholds; no timestamps in outputs")
    g.add_argument("--keep-going", action="store_true", default=d(False),
                   help="exit 0 even if some dataset entries failed to load")
    g.add_argument("-v", "--verbose", action="count", default=d(0))
    return p


def _data_options(p):
    p.add_argument("--data", type=Path, required=True, help="dataset root")
    p.add_argument("--split", choices=("train", "val", "test", "all"), default="all")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kpbms", description=__doc__.split("\n")[0],
                                     parents=[_global_options(False)])
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    common = [_global_options(True)]

    p = sub.add_parser("saliency", parents=common, help="emit attention maps")
    _data_options(p)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--mode", choices=("per-keypoint", "per-class"), default="per-class")
    p.add_argument("--bits", type=int, choices=(8, 16), default=8)
    p.add_argument("--csa", action="store_true", help="intersect with border-seeded BMS activation")

    p = sub.add_parser("bboxes", parents=common, help="generate bounding boxes")
    _data_options(p)
    p.add_argument("--out", type=Path, required=True, help="box-set JSON lines file")
    p.add_argument("--yolo", type=Path, help="directory for YOLO label files")
    p.add_argument("--limit", type=int, default=DEFAULT_LIMIT, help="max combinations scored per image")

    p = sub.add_parser("evaluate", parents=common, help="score boxes against keypoints")
    _data_options(p)
    p.add_argument("--boxes", type=Path, help="box-set JSON lines file (default: generate boxes)")
    p.add_argument("--json", type=Path, help="write the report as JSON")
    p.add_argument("--name", default="Bounding Box Generation")
    p.add_argument("--strict-class", action="store_true")
    p.add_argument("--q-b-over", choices=("covered", "all"), default="covered")

    p = sub.add_parser("tune", parents=common, help="hyperparameter search")
    _data_options(p)
    p.add_argument("--method", choices=("tpe", "random"), default="tpe")
    p.add_argument("--budget", type=int, default=50)
    p.add_argument("--gamma", type=float, default=0.25)
    p.add_argument("--startup", type=int, default=10)
    p.add_argument("--log", type=Path, default=Path("trials.jsonl"))
    p.add_argument("--best-config", type=Path, default=Path("best.cfg"))

    p = sub.add_parser("compare-bms", parents=common, help="baseline BMS vs keypoint-seeded maps")
    _data_options(p)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("fixtures", parents=common, help="write a synthetic fixture dataset")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--kind", choices=("clean", "hard"), default="clean")
    p.add_argument("--split", choices=("train", "val", "test"), default=None)
    p.add_argument("--width", type=int, default=160)
    p.add_argument("--height", type=int, default=120)
    return parser


def _resolve_config(args) -> SaliencyConfig:
    config = kio.read_config(args.config) if args.config else SaliencyConfig()
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.deterministic:
        config = config.deterministic()
    return config


def _pmap(fn, items, jobs):
    # ordered results; the caller is the single writer
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(jobs) as pool:
            return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))
    return [fn(item) for item in items]


def _load(args):
    index = kio.load_dataset(args.data, args.split)
    if not index.report.ok:
        print(index.report.summary(), file=sys.stderr)
    return index


def _finish(index, args) -> int:
    if index.report.ok or args.keep_going:
        return 0
    print("dataset had load failures; rerun with --keep-going to ignore", file=sys.stderr)
    return 1


# workers (module level so they pickle) ------------------------------------

def _boxes_job(task):
    entry, config, limit = task
    return generate(entry.load_image(), entry.keypoints, config, entry.image_id, limit)


def _saliency_job(task):
    entry, config, mode, csa = task
    image = entry.load_image()
    if mode == "per-class":
        rng = job_rng(config.seed, entry.image_id) if config.sampling == "random" else None
        return {cls.value: m for cls, m in saliency_per_class(image, entry.keypoints, config, rng, csa).items()}
    out = {}
    for j, kp in enumerate(entry.keypoints):
        rng = job_rng(config.seed, entry.image_id, j) if config.sampling == "random" else None
        out[f"kp{j:03d}"] = saliency_for_keypoint(image, kp, config, rng)
    return out


def _compare_job(task):
    entry, config = task
    image = entry.load_image()
    rng = job_rng(config.seed, entry.image_id) if config.sampling == "random" else None
    bms = bms_saliency(image, config, rng)
    ours = saliency_for_seeds(image, list(entry.keypoints), config, rng)
    return image, bms, ours


# commands ----------------------------------------------------------------

def cmd_saliency(args, config) -> int:
    index = _load(args)
    args.out.mkdir(parents=True, exist_ok=True)
    tasks = [(e, config, args.mode, args.csa) for e in index]
    for entry, maps in zip(index, _pmap(_saliency_job, tasks, args.jobs)):
        for suffix, amap in maps.items():
            kio.save_attention_map(args.out / f"{entry.image_id}_{suffix}.png", amap, args.bits)
    return _finish(index, args)


def cmd_bboxes(args, config) -> int:
    index = _load(args)
    boxsets = _pmap(_boxes_job, [(e, config, args.limit) for e in index], args.jobs)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    kio.write_boxsets(args.out, boxsets)
    if args.yolo:
        args.yolo.mkdir(parents=True, exist_ok=True)
        for entry, bs in zip(index, boxsets):
            lines = kio.export_yolo(bs.boxes, (entry.width, entry.height))
            (args.yolo / f"{entry.image_id}.txt").write_text("".join(line + "\n" for line in lines))
    approx = sum(bs.approximate for bs in boxsets)
    print(f"wrote {len(boxsets)} box sets to {args.out}" + (f" ({approx} approximate)" if approx else ""))
    return _finish(index, args)


def cmd_evaluate(args, config) -> int:
    index = _load(args)
    if args.boxes:
        by_id = {bs.image_id: bs for bs in kio.read_boxsets(args.boxes)}
        boxsets = [by_id.get(e.image_id, BoxSet(e.image_id)) for e in index]
    else:
        boxsets = _pmap(_boxes_job, [(e, config, DEFAULT_LIMIT) for e in index], args.jobs)
    reports = [evaluate(bs, e.keypoints, args.strict_class, args.q_b_over) for e, bs in zip(index, boxsets)]
    if not reports:
        print("no images to evaluate", file=sys.stderr)
        return 1
    report = aggregate(reports)
    print(format_table({args.name: report}))
    if args.json:
        args.json.write_text(report.to_json() + "\n")
    return _finish(index, args)


def cmd_tune(args, config) -> int:
    index = _load(args)
    if not len(index):
        print("no images to tune on", file=sys.stderr)
        return 1
    dataset = [(e.image_id, e.load_image(), e.keypoints) for e in index]
    seed = config.seed
    stamp = not args.deterministic

    from .tuner import evaluate_config

    def fn(cfg):
        report = evaluate_config(dataset, cfg, args.jobs)
        return report.f_score * report.q, report.summary()

    common = dict(base=config, objective_fn=fn, initial=[config], timestamps=stamp)
    if args.method == "tpe":
        best, trials = tpe_search(SearchSpace(), dataset, args.budget, seed, args.gamma,
                                  min(args.startup, args.budget), **common)
    else:
        best, trials = random_search(SearchSpace(), dataset, args.budget, seed, **common)
    write_trial_log(args.log, trials)
    kio.write_config(args.best_config, best.config)
    print(f"best objective {best.objective:.4f} (trial {best.number}); default {trials[0].objective:.4f}")
    return _finish(index, args)


def _panel(*maps) -> np.ndarray:
    cols = []
    for m in maps:
        peak = m.max()
        cols.append(m / peak if peak > 0 else m)
        cols.append(np.ones((m.shape[0], 2)))
    return np.hstack(cols[:-1])


def cmd_compare_bms(args, config) -> int:
    index = _load(args)
    args.out.mkdir(parents=True, exist_ok=True)
    for entry, (image, bms, ours) in zip(index, _pmap(_compare_job, [(e, config) for e in index], args.jobs)):
        kio.save_attention_map(args.out / f"{entry.image_id}_bms.png", bms)
        kio.save_attention_map(args.out / f"{entry.image_id}_keypoint.png", ours)
        kio.write_image(args.out / f"{entry.image_id}_panel.png", _panel(image, bms, ours))
    return _finish(index, args)


def cmd_fixtures(args, config) -> int:
    scenes = make_fixture_set(args.n, args.kind, config.seed, args.width, args.height)
    base = kio.write_dataset(args.out, scenes, args.split)
    print(f"wrote {len(scenes)} {args.kind} scenes to {base}")
    return 0


COMMANDS = {
    "saliency": cmd_saliency,
    "bboxes": cmd_bboxes,
    "evaluate": cmd_evaluate,
    "tune": cmd_tune,
    "compare-bms": cmd_compare_bms,
    "fixtures": cmd_fixtures,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        config = _resolve_config(args)
        return COMMANDS[args.command](args, config)
    except (OSError, ValueError) as exc:
        print(f"kpbms {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
