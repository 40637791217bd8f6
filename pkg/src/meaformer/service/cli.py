"""Command-line surface.

Verbs: generate | train | eval | measure | serve | assess.  All randomness
flows from --seed, so a repeated invocation writes byte-identical dataset
files and metric logs.  Flags win over the optional --config JSON file;
checkpoint paths are also resolved against $MEAF_CHECKPOINT_DIR.

Exit codes: 0 ok, 2 usage, 3 data error, 4 training divergence.
"""

import argparse
import json
import os
import sys

from ..data import PhantomConfig, generate_phantom, load_dataset, save_dataset
from ..errors import (CheckpointError, ContractViolation, DatasetError,
                      TrainingDiverged)
from ..model import ModelConfig, load_checkpoint, save_checkpoint
from ..pipeline import TrainConfig, classify_response, evaluate, measure, train
from ..pipeline.measure import contour_of

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_DIVERGED = 4


def resolve_checkpoint(path):
    if os.path.exists(path):
        return path
    root = os.environ.get("MEAF_CHECKPOINT_DIR")
    if root:
        cand = os.path.join(root, path)
        if os.path.exists(cand):
            return cand
    raise CheckpointError(f"checkpoint not found: {path}")


def _load_models(args):
    step1, _ = load_checkpoint(resolve_checkpoint(args.step1))
    step2, _ = load_checkpoint(resolve_checkpoint(args.step2))
    return step1, step2


def _dataset_ref(ref):
    """'file.mead#3' -> (phantom list, index or None)."""
    path, _, idx = ref.partition("#")
    data = load_dataset(path)
    return data, (int(idx) if idx else None)


def cmd_generate(args):
    cfg = PhantomConfig(size=args.size, spacing_mm_per_px=args.spacing)
    phantoms = [generate_phantom(args.seed + i, cfg) for i in range(args.count)]
    save_dataset(phantoms, args.out)
    print(f"wrote {len(phantoms)} phantoms to {args.out}")
    return EXIT_OK


def cmd_train(args):
    phantoms = load_dataset(args.data)
    if args.limit:
        phantoms = phantoms[:args.limit]
    model_cfg = ModelConfig(
        input_size=args.size, channels=args.channels,
        n_encoder_layers=args.encoder_layers, n_decoder_layers=args.decoder_layers,
        n_queries=4 if args.step == 2 else 2, seed=args.seed,
        train_seg_head=not args.no_seg_head)
    from ..data import AugmentationConfig
    tcfg = TrainConfig(
        steps=args.steps, batch_size=args.batch, lr=args.lr, seed=args.seed,
        sigma=args.sigma,
        augmentation=None if args.no_augment else AugmentationConfig(),
        use_consistency=False if args.no_consistency else None,
        val_every=args.val_every)
    log_fh = open(args.log, "w") if args.log else None
    try:
        model, _ = train(f"step{args.step}", phantoms, tcfg, model_cfg, log_fh=log_fh)
    finally:
        if log_fh:
            log_fh.close()
    save_checkpoint(model, args.out, step=args.steps)
    print(f"wrote checkpoint to {args.out}")
    return EXIT_OK


def cmd_eval(args):
    phantoms = load_dataset(args.data)
    if args.limit:
        phantoms = phantoms[:args.limit]
    step1, step2 = _load_models(args)
    summary = evaluate(phantoms, step1, step2, seed=args.seed)
    print(summary.to_json() if args.json else summary.to_text())
    return EXIT_OK


def cmd_measure(args):
    data, idx = _dataset_ref(args.image)
    if idx is None:
        raise DatasetError("--image needs a '#index' dataset reference")
    if not (0 <= idx < len(data)):
        raise DatasetError(f"index {idx} out of range (dataset holds {len(data)})")
    phantom = data[idx]
    x, y = (float(v) for v in args.click.split(","))
    step1, step2 = _load_models(args)
    rep = measure(phantom.image, (x, y),
                  args.spacing or phantom.spacing_mm_per_px, step1, step2,
                  ground_truth=phantom if args.with_gt else None)
    if rep.failed:
        print(json.dumps({"failed": True, "flags": rep.flags}))
        return EXIT_DATA
    payload = {
        "box": [rep.box.x0, rep.box.y0, rep.box.x1, rep.box.y1],
        "sources": {name: {"long_px": m.long_px, "short_px": m.short_px,
                           "long_mm": m.long_mm, "short_mm": m.short_mm}
                    for name, m in rep.measurements.items()},
        "fused": {"long_px": rep.fused.long_px, "short_px": rep.fused.short_px,
                  "long_mm": rep.fused.long_mm, "short_mm": rep.fused.short_mm},
        "contour_points": len(contour_of(rep)),
        "flags": rep.flags,
    }
    if rep.dice is not None:
        payload["dice"] = rep.dice
        payload["box_iou"] = rep.box_iou
    print(json.dumps(payload, sort_keys=True))
    return EXIT_OK


def cmd_serve(args):
    import uvicorn

    from .app import create_app
    app = create_app(resolve_checkpoint(args.step1), resolve_checkpoint(args.step2),
                     demo_data_path=args.demo_data)
    if args.ui_dir:
        from fastapi.staticfiles import StaticFiles
        app.mount("/ui", StaticFiles(directory=args.ui_dir, html=True), name="ui")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def cmd_assess(args):
    cls = classify_response(args.baseline_mm, args.followup_mm)
    change = 100.0 * (args.followup_mm - args.baseline_mm) / args.baseline_mm
    print(json.dumps({"response_class": cls.value, "percent_change": change}))
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="meaformer",
                                 description="click-guided lesion measurement")
    ap.add_argument("--config", help="JSON file with flag defaults (flags win)")
    sub = ap.add_subparsers(dest="verb", required=True)

    g = sub.add_parser("generate", help="write a synthetic phantom dataset")
    g.add_argument("--count", type=int, default=100)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--size", type=int, default=64)
    g.add_argument("--spacing", type=float, default=0.8)
    g.set_defaults(fn=cmd_generate)

    t = sub.add_parser("train", help="train a step-1 or step-2 model")
    t.add_argument("--data", required=True)
    t.add_argument("--step", type=int, choices=(1, 2), required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--steps", type=int, default=2000)
    t.add_argument("--batch", type=int, default=8)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--sigma", type=float, default=5.0)
    t.add_argument("--size", type=int, default=64)
    t.add_argument("--channels", type=int, default=16)
    t.add_argument("--encoder-layers", type=int, default=2)
    t.add_argument("--decoder-layers", type=int, default=2)
    t.add_argument("--limit", type=int, default=0)
    t.add_argument("--val-every", type=int, default=200)
    t.add_argument("--log", help="write ndjson metrics log here")
    t.add_argument("--no-consistency", action="store_true")
    t.add_argument("--no-augment", action="store_true")
    t.add_argument("--no-seg-head", action="store_true")
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="evaluate checkpoints on a dataset")
    e.add_argument("--data", required=True)
    e.add_argument("--step1", required=True)
    e.add_argument("--step2", required=True)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--limit", type=int, default=0)
    e.add_argument("--json", action="store_true")
    e.set_defaults(fn=cmd_eval)

    m = sub.add_parser("measure", help="measure one dataset image")
    m.add_argument("--image", required=True, help="dataset reference file.mead#index")
    m.add_argument("--click", required=True, help="x,y")
    m.add_argument("--step1", required=True)
    m.add_argument("--step2", required=True)
    m.add_argument("--spacing", type=float, default=0.0)
    m.add_argument("--with-gt", action="store_true")
    m.set_defaults(fn=cmd_measure)

    s = sub.add_parser("serve", help="run the HTTP measurement service")
    s.add_argument("--step1", required=True)
    s.add_argument("--step2", required=True)
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8008)
    s.add_argument("--demo-data", help="dataset served at /demo")
    s.add_argument("--ui-dir", help="static frontend directory mounted at /ui")
    s.set_defaults(fn=cmd_serve)

    a = sub.add_parser("assess", help="classify longitudinal response")
    a.add_argument("--baseline-mm", type=float, required=True)
    a.add_argument("--followup-mm", type=float, required=True)
    a.set_defaults(fn=cmd_assess)
    return ap


def main(argv=None):
    ap = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    # config file provides defaults; explicit flags win because they parse later
    if "--config" in argv:
        i = argv.index("--config")
        with open(argv[i + 1]) as fh:
            defaults = json.load(fh)
        for action in ap._subparsers._group_actions[0].choices.values():
            known = {a.dest for a in action._actions}
            action.set_defaults(**{k: v for k, v in defaults.items() if k in known})
    try:
        args = ap.parse_args(argv)
        return args.fn(args)
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (DatasetError, CheckpointError, ContractViolation, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
