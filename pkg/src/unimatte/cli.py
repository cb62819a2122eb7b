"""unimatte command line: composite, make-reps, infer, evaluate, audit, fixtures.

Exit codes: 0 ok, 1 bad configuration, 2 bad or missing data, 3 internal error.
"""
import argparse
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import logging
import os
from pathlib import Path
import sys
import time

from . import fixtures, semantics
from .datapipe import (DEFAULT_BOKEH_SIGMA, ManifestEntry, ManifestError, ingest_manifest,
                       plan_composites, render_composite, write_manifest)
from .imageio import read_alpha, read_rgb, write_alpha, write_rep, write_rgb
from .metrics import aggregate, evaluate_image
from .network import audit
from .network.model import hybrid_inference
from .network.weights import WeightStoreError, init_weights, load_weights, save_weights
from .report import WRITERS, to_markdown, write_report

log = logging.getLogger("unimatte")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
WORKERS_ENV = "UNIMATTE_WORKERS"
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


def _default_workers():
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


@dataclass
class RunConfig:
    command: str
    manifest: Path | None = None
    out_dir: Path | None = None
    pred_dir: Path | None = None
    bg_dir: Path | None = None
    weights: Path | None = None
    seed: int | None = None
    scales: tuple = (1 / 3, 1 / 4)
    workers: int = 1
    formats: tuple = ("csv", "json", "md")
    label: str = "Ours"
    fanout: int = 5
    augment: bool = False
    bokeh_sigma: float = DEFAULT_BOKEH_SIGMA
    erode: int = semantics.DEFAULT_RADIUS
    dilate: int = semantics.DEFAULT_RADIUS
    dump: bool = False
    extra: dict = field(default_factory=dict)

    def validate(self):
        if self.workers < 1:
            raise ConfigError("worker count must be >= 1")
        if len(self.scales) != 2 or not all(0 < s <= 1 for s in self.scales):
            raise ConfigError(f"scale factors must be two values in (0, 1], got {self.scales}")
        for fmt in self.formats:
            if fmt not in WRITERS:
                raise ConfigError(f"unknown report format {fmt!r} (choose from {', '.join(WRITERS)})")
        if self.command == "infer" and (self.weights is None) == (self.seed is None):
            raise ConfigError("infer needs exactly one weight source: --weights DIR or --seed N")
        if self.erode < 0 or self.dilate < 0:
            raise ConfigError("erosion/dilation radii must be >= 0")
        if self.fanout < 1:
            raise ConfigError("fanout must be >= 1")
        return self


def _pool_map(fn, items, workers):
    """Apply ``fn`` over ``items`` with a thread pool; order of results follows ``items``."""
    if workers == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _load_manifest(cfg):
    if cfg.manifest is None:
        raise ConfigError("--manifest is required")
    return ingest_manifest(cfg.manifest), Path(cfg.manifest).parent


def _need_out(cfg):
    if cfg.out_dir is None:
        raise ConfigError("--out-dir is required")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_reps(out, name, alpha, itype, erode, dilate):
    tri = semantics.trimap_from_alpha(alpha, erode, dilate)
    write_rep(out / "trimap" / f"{name}.png", tri)
    write_rep(out / "rep" / f"{name}.png", semantics.unify(tri, itype))


def cmd_composite(cfg):
    entries, root = _load_manifest(cfg)
    out = _need_out(cfg)
    if cfg.bg_dir is None or not Path(cfg.bg_dir).is_dir():
        raise ConfigError(f"--bg-dir must be an existing directory, got {cfg.bg_dir}")
    bg_paths = {p.stem: p for p in sorted(Path(cfg.bg_dir).iterdir())
                if p.suffix.lower() in IMAGE_SUFFIXES}
    if not bg_paths:
        raise DataError(f"no background images in {cfg.bg_dir}")
    by_id = {e.id: e for e in entries}
    plan = plan_composites(entries, list(bg_paths), cfg.fanout, cfg.seed or 0,
                           cfg.augment, cfg.bokeh_sigma)

    def run(spec):
        e = by_id[spec.fg_id]
        fg_path = e.resolve(root, "fg") or e.resolve(root, "image")
        try:
            fg = read_rgb(fg_path)
            alpha = read_alpha(e.resolve(root, "alpha"))
            bg = read_rgb(bg_paths[spec.bg_id])
            image, a, f, b = render_composite(spec, fg, alpha, bg)
        except (OSError, ValueError) as exc:
            raise DataError(f"{spec.out_id}: {exc}") from None
        name = spec.out_id
        write_rgb(out / "image" / f"{name}.png", image)
        write_alpha(out / "alpha" / f"{name}.png", a)
        write_rgb(out / "fg" / f"{name}.png", f)
        write_rgb(out / "bg" / f"{name}.png", b)
        _write_reps(out, name, a, e.type, cfg.erode, cfg.dilate)
        return ManifestEntry(name, f"image/{name}.png", f"alpha/{name}.png", e.type, e.category,
                             e.split, fg=f"fg/{name}.png", bg=f"bg/{name}.png")

    made = sorted(_pool_map(run, plan, cfg.workers), key=lambda m: m.id)
    write_manifest(made, out / "manifest.jsonl")
    log.info("composited %d images from %d foregrounds x %d backgrounds", len(made), len(entries),
             len(bg_paths))
    return made


def cmd_make_reps(cfg):
    entries, root = _load_manifest(cfg)
    out = _need_out(cfg)

    def run(e):
        try:
            alpha = read_alpha(e.resolve(root, "alpha"))
            _write_reps(out, e.id, alpha, e.type, cfg.erode, cfg.dilate)
        except (OSError, ValueError) as exc:
            raise DataError(f"{e.id}: {exc}") from None
        return e.id

    done = _pool_map(run, entries, cfg.workers)
    log.info("wrote trimaps and unified maps for %d images", len(done))
    return sorted(done)


def _weights(cfg):
    if cfg.weights is not None:
        return load_weights(cfg.weights)
    return init_weights(seed=cfg.seed)


def cmd_infer(cfg):
    entries, root = _load_manifest(cfg)
    out = _need_out(cfg)
    store = _weights(cfg)
    log.info("weights: %s", store.provenance)

    def run(e):
        try:
            image = read_rgb(e.resolve(root, "image"))
        except OSError as exc:
            raise DataError(f"{e.id}: {exc}") from None
        t0 = time.perf_counter()
        try:
            res = hybrid_inference(store, image, cfg.scales)
        except ValueError as exc:
            raise DataError(f"{e.id}: {exc}") from None
        log.info("%s: %dx%d in %.3f s (runs at %s)", e.id, image.shape[1], image.shape[2],
                 time.perf_counter() - t0, res.sizes)
        write_alpha(out / f"{e.id}.png", res.alpha)
        if cfg.dump:
            write_rep(out / "unified" / f"{e.id}.png", res.unified)
            write_alpha(out / "attention" / f"{e.id}.png", res.spatial_attention)
        return e.id

    return sorted(_pool_map(run, entries, cfg.workers))


def cmd_evaluate(cfg):
    entries, root = _load_manifest(cfg)
    if cfg.pred_dir is None:
        raise ConfigError("--pred-dir is required")
    pred_dir = Path(cfg.pred_dir)
    missing = sorted(e.id for e in entries if not (pred_dir / f"{e.id}.png").is_file())
    if missing:
        raise DataError(f"missing predictions for {len(missing)} image(s): {', '.join(missing)}")
    out = _need_out(cfg) if cfg.out_dir is not None else pred_dir

    def run(e):
        try:
            gt = read_alpha(e.resolve(root, "alpha"))
            pred = read_alpha(pred_dir / f"{e.id}.png")
            if pred.shape != gt.shape:
                raise ValueError(f"prediction is {pred.shape}, ground truth is {gt.shape}")
            tri = semantics.trimap_from_alpha(gt, cfg.erode, cfg.dilate)
            return evaluate_image(pred, gt, tri, e.type, e.category, e.id)
        except (OSError, ValueError) as exc:
            raise DataError(f"{e.id}: {exc}") from None

    records = sorted(_pool_map(run, entries, cfg.workers), key=lambda r: r.image_id)
    report = aggregate(records)
    write_report(report, out, cfg.formats, cfg.label)
    sys.stdout.write(to_markdown(report, cfg.label))
    return report


def cmd_audit(cfg):
    text = audit.format_audit(input_size=cfg.extra.get("input_size", 320),
                              reference_size=cfg.extra.get("reference_size", 800))
    print(text)
    return text


def cmd_init_weights(cfg):
    out = _need_out(cfg)
    store = init_weights(seed=cfg.seed or 0)
    save_weights(store, out)
    log.info("saved %d tensors to %s", len(store.names()), out)
    return out


def cmd_fixtures(cfg):
    out = _need_out(cfg)
    size = cfg.extra.get("size", 256)
    src, bg = fixtures.make_source_set(out / "source", size=size, seed=cfg.seed or 0)
    ev, pred = fixtures.make_eval_set(out / "eval", seed=cfg.seed or 0)
    print(f"source manifest: {src}\nbackgrounds: {bg}\neval manifest: {ev}\npredictions: {pred}")
    return src, bg, ev, pred


COMMANDS = {
    "composite": cmd_composite,
    "make-reps": cmd_make_reps,
    "infer": cmd_infer,
    "evaluate": cmd_evaluate,
    "audit": cmd_audit,
    "init-weights": cmd_init_weights,
    "fixtures": cmd_fixtures,
}


def _scales(text):
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad scale list {text!r}") from None
    if len(vals) != 2:
        raise argparse.ArgumentTypeError("--scales takes two comma-separated values")
    return vals


def _formats(text):
    return tuple(f.strip() for f in text.split(",") if f.strip())


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser():
    p = _Parser(prog="unimatte", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, manifest=True, out=True):
        if manifest:
            sp.add_argument("--manifest", type=Path, required=True)
        if out:
            sp.add_argument("--out-dir", type=Path, required=True)
        sp.add_argument("--workers", type=int, default=None,
                        help=f"worker threads (default: ${WORKERS_ENV} or 1)")

    def radii(sp):
        sp.add_argument("--erode", type=int, default=semantics.DEFAULT_RADIUS)
        sp.add_argument("--dilate", type=int, default=semantics.DEFAULT_RADIUS)

    sp = sub.add_parser("composite", help="composite foregrounds onto backgrounds")
    common(sp)
    sp.add_argument("--bg-dir", type=Path, required=True)
    sp.add_argument("--fanout", type=int, default=5)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--augment", action="store_true", help="random flip and crop-resize")
    sp.add_argument("--bokeh-sigma", type=float, default=DEFAULT_BOKEH_SIGMA)
    radii(sp)

    sp = sub.add_parser("make-reps", help="write trimaps and unified maps")
    common(sp)
    radii(sp)

    sp = sub.add_parser("infer", help="predict alpha mattes")
    common(sp)
    src = sp.add_mutually_exclusive_group()
    src.add_argument("--weights", type=Path)
    src.add_argument("--seed", type=int)
    sp.add_argument("--scales", type=_scales, default=(1 / 3, 1 / 4))
    sp.add_argument("--dump", action="store_true", help="also write unified maps and attention")

    sp = sub.add_parser("evaluate", help="score predictions and write the report")
    common(sp, out=False)
    sp.add_argument("--pred-dir", type=Path, required=True)
    sp.add_argument("--out-dir", type=Path)
    sp.add_argument("--format", dest="formats", type=_formats, default=("csv", "json", "md"))
    sp.add_argument("--label", default="Ours")
    radii(sp)

    sp = sub.add_parser("audit", help="print the architecture table and totals")
    sp.add_argument("--input-size", type=int, default=320)
    sp.add_argument("--reference-size", type=int, default=800)

    sp = sub.add_parser("init-weights", help="write a seeded weight store")
    sp.add_argument("--out-dir", type=Path, required=True)
    sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("fixtures", help="generate the synthetic fixture data")
    sp.add_argument("--out-dir", type=Path, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--size", type=int, default=256)
    return p


_EXTRA = ("input_size", "reference_size", "size")


def config_from_args(ns):
    fields = set(RunConfig.__dataclass_fields__)
    kw = {k: v for k, v in vars(ns).items() if k in fields and v is not None}
    kw["extra"] = {k: getattr(ns, k) for k in _EXTRA if getattr(ns, k, None) is not None}
    if getattr(ns, "workers", None) is None:
        kw["workers"] = _default_workers()
    return RunConfig(**kw).validate()


def main(argv=None):
    try:
        ns = build_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"unimatte: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if ns.verbose else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = config_from_args(ns)
        COMMANDS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"unimatte: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ManifestError, WeightStoreError, OSError) as exc:
        print(f"unimatte: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        log.exception("internal error")
        print(f"unimatte: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
