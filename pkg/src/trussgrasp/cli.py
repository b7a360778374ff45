"""Command line entry point: ``trussgrasp {detect,eval,synth}``.

Exit codes: 0 when the command ran (per-image failures are listed in the
output), 1 for usage or configuration errors, 2 for I/O errors.
"""

import argparse
import logging
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import synth
from ._io import atomic_write, read_image, write_json, write_png
from .config import load_config
from .evaluation import aggregate, evaluate_scene, format_table
from .exceptions import ConfigError, ManifestError
from .overlay import draw_result
from .pipeline import SCHEMA_VERSION, TrussPipeline

log = logging.getLogger("trussgrasp")

EXIT_OK, EXIT_USAGE, EXIT_IO = 0, 1, 2
U64_MAX = 2**64 - 1
IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _u64(text):
    v = int(text)
    if not 0 <= v <= U64_MAX:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser():
    p = _Parser(prog="trussgrasp", description="Vine-tomato truss detection and grasp planning.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML configuration file")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--overlay", action="store_true", help="also write PNG overlays")
    common.add_argument("--workers", type=_positive, default=1)
    common.add_argument("--seed", type=_u64, help="segmentation seed")

    d = sub.add_parser("detect", parents=[common], help="run the pipeline on images")
    d.add_argument("inputs", nargs="+", type=Path, help="image files or directories")

    e = sub.add_parser("eval", parents=[common], help="score the pipeline on a corpus")
    e.add_argument("manifest", type=Path, help="corpus manifest.json")

    s = sub.add_parser("synth", help="generate a synthetic corpus")
    s.add_argument("--out", type=Path, required=True)
    s.add_argument("--n", type=_positive, default=84, help="number of scenes")
    s.add_argument("--seed", type=_u64, default=0)
    s.add_argument("--difficulty", choices=synth.DIFFICULTIES, default="simple")
    s.add_argument("--px-per-mm", type=float, default=2.0)
    return p


def _config(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, segmentation=replace(cfg.segmentation, seed=args.seed))
    if args.overlay:
        cfg = replace(cfg, output=replace(cfg.output, overlay=True))
    return cfg


def _run_one(job):
    """Worker body: read, run, optionally draw. Returns plain data only."""
    name, path, cfg = job
    try:
        img = read_image(path)
    except OSError as exc:
        return name, None, None, str(exc)
    res = TrussPipeline(cfg).predict(img)
    overlay = None
    if cfg.output.overlay:
        g = cfg.grasp
        overlay = draw_result(img, res, cfg.camera.px_per_mm, (g.gripper_width_mm, g.gripper_length_mm))
    res.mask = None
    res.crop_transform = None
    return name, res, overlay, None


def _run_many(jobs, workers):
    if workers == 1 or len(jobs) == 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_run_one, jobs))


def _result_dict(res, include_graph):
    if res.rect is not None:
        res.crop_transform = res.rect.to_original
    return res.to_dict(include_graph=include_graph)


def _timing_summary(per_image):
    totals = [t["total"] for t in per_image.values() if t]
    summary = {"n": len(totals)}
    if totals:
        summary.update(
            median_s=statistics.median(totals),
            mean_s=statistics.fmean(totals),
            std_s=statistics.pstdev(totals),
        )
    return {"summary": summary, "per_image": per_image}


def _collect_inputs(paths):
    out = []
    for p in paths:
        if p.is_dir():
            out.extend(sorted(q for q in p.iterdir() if q.suffix.lower() in IMAGE_SUFFIXES))
        else:
            out.append(p)
    return out


def cmd_detect(args):
    cfg = _config(args)
    paths = _collect_inputs(args.inputs)
    if not paths:
        log.error("no input images")
        return EXIT_USAGE
    args.out.mkdir(parents=True, exist_ok=True)
    names, seen = [], {}
    for p in paths:
        # disambiguate equal file names from different directories
        k = seen.get(p.stem, 0)
        seen[p.stem] = k + 1
        names.append(p.stem if k == 0 else f"{p.stem}_{k}")
    jobs = [(n, str(p), cfg) for n, p in zip(names, paths)]
    results, timings, io_errors = {}, {}, 0
    for name, res, overlay, err in _run_many(jobs, args.workers):
        if err is not None:
            io_errors += 1
            log.error(err)
            results[name] = {"schema_version": SCHEMA_VERSION, "ok": False, "io_error": err}
            continue
        d = _result_dict(res, cfg.output.include_graph)
        results[name] = d
        timings[name] = res.timings
        write_json(args.out / f"{name}.json", d)
        if overlay is not None:
            write_png(args.out / f"{name}_overlay.png", overlay)
        if res.failure:
            log.warning("%s: %s failure (%s)", name, res.failure["stage"], res.failure["error"])
    write_json(args.out / "results.json", {"schema_version": SCHEMA_VERSION, "results": results})
    write_json(args.out / "timings.json", _timing_summary(timings))
    return EXIT_IO if io_errors else EXIT_OK


def cmd_eval(args):
    cfg = _config(args)
    try:
        manifest, base = synth.load_manifest(args.manifest)
    except (ValueError, KeyError) as exc:
        # malformed JSON or schema mismatch
        raise ManifestError(str(exc)) from exc
    if manifest.get("px_per_mm") not in (None, cfg.camera.px_per_mm):
        log.warning(
            "corpus px_per_mm %s differs from configured %s", manifest["px_per_mm"], cfg.camera.px_per_mm
        )
    args.out.mkdir(parents=True, exist_ok=True)
    scenes = manifest["scenes"]
    names = [Path(e["image"]).stem for e in scenes]
    jobs = [(n, str(base / e["image"]), cfg) for n, e in zip(names, scenes)]
    evals, timings = [], {}
    for (name, res, overlay, err), entry in zip(_run_many(jobs, args.workers), scenes):
        if err is not None:
            raise OSError(err)
        _, truth = synth.load_scene(base, entry)
        evals.append(
            evaluate_scene(res, truth, name, cfg.eval.tomato_match_ratio, cfg.eval.junction_match_mm)
        )
        timings[name] = res.timings
        if overlay is not None:
            write_png(args.out / f"{name}_overlay.png", overlay)
    g = cfg.grasp
    clearance = g.gripper_width_mm + 20.0 if g.clearance_mm is None else g.clearance_mm
    report = aggregate(
        evals, cfg.camera.px_per_mm, clearance, cfg.eval.tomato_match_ratio, cfg.eval.junction_match_mm
    )
    report = {"schema_version": SCHEMA_VERSION, "corpus": manifest.get("difficulty"), **report}
    write_json(args.out / "report.json", report)
    table = format_table(report)
    atomic_write(args.out / "report.txt", table.encode("utf-8"))
    tim = _timing_summary(timings)
    write_json(args.out / "timings.json", tim)
    sys.stdout.write(table)
    if tim["summary"]["n"]:
        s = tim["summary"]
        sys.stdout.write(f"runtime per image: {s['mean_s']:.2f} +- {s['std_s']:.2f} s\n")
    return EXIT_OK


def cmd_synth(args):
    path = synth.write_corpus(args.out, args.n, args.seed, args.difficulty, px_per_mm=args.px_per_mm)
    print(path)
    return EXIT_OK


COMMANDS = {"detect": cmd_detect, "eval": cmd_eval, "synth": cmd_synth}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ManifestError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
