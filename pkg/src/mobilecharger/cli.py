"""Command-line front end.

Global flags (``--config``, ``--seed``, ``--out``, ``--format``,
``--print-default-config``) are accepted before or after the subcommand.
Exit codes: 0 success, 1 usage or config error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys

import numpy as np

from . import classifier as C
from . import delta_kin as K
from . import tactile as T
from .errors import ConfigError, MobileChargerError
from .geometry import Vec3, camera_to_delta, delta_to_camera
from .harness import config as cfgmod
from .harness import detection, experiment

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _global_flags(defaults: bool) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    d = (lambda v: v) if defaults else (lambda v: argparse.SUPPRESS)
    p.add_argument("--config", default=d(None), help="JSON config file")
    p.add_argument("--seed", type=int, default=d(None), help="seed overriding the config")
    p.add_argument("--out", default=d(None), help="output path (default stdout)")
    p.add_argument("--format", choices=("json", "csv"), default=d("json"))
    p.add_argument("--print-default-config", action="store_true", default=d(False))
    return p


def build_parser() -> argparse.ArgumentParser:
    sub_common = _global_flags(defaults=False)
    p = _Parser(prog="mobilecharger", parents=[_global_flags(defaults=True)],
                description="Docking-charger simulation toolkit")
    sp = p.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, help_):
        return sp.add_parser(name, help=help_, parents=[sub_common])

    a = add("ik", "joint angles (deg) for an end-effector position (cm)")
    a.add_argument("x", type=float)
    a.add_argument("y", type=float)
    a.add_argument("z", type=float)

    a = add("fk", "end-effector position (cm) for joint angles (deg)")
    a.add_argument("theta1", type=float)
    a.add_argument("theta2", type=float)
    a.add_argument("theta3", type=float)

    a = add("transform", "map a camera-frame point into the actuator frame")
    a.add_argument("x", type=float)
    a.add_argument("y", type=float)
    a.add_argument("z", type=float)
    a.add_argument("--inverse", action="store_true", help="actuator frame to camera frame")

    a = add("synth-tactile", "generate a synthetic tactile dataset")
    a.add_argument("--kind", required=True, choices=[k.value for k in T.Kind])
    a.add_argument("--n-per-class", type=int)
    a.add_argument("--noise", type=float, help="noise sigma in N")

    a = add("train-classifier", "train a misalignment classifier on a tactile dataset")
    a.add_argument("data", help="tactile dataset (.csv or .json)")
    a.add_argument("--epochs", type=int)

    a = add("classify", "classify tactile frames with a trained model")
    a.add_argument("model", help="model JSON")
    a.add_argument("data", help="tactile CSV")

    a = add("simulate", "run the Monte-Carlo docking experiment")
    a.add_argument("--trials", type=int, help="trials per omega")
    a.add_argument("--no-classify", action="store_true", help="skip the tactile stage")

    a = add("analyze", "success rates and ANOVA for exported trial records")
    a.add_argument("records", help="records file (.json or .csv)")

    a = add("eval-detection", "AP, precision and recall for detector output")
    a.add_argument("input", help="JSON with predictions and ground_truth")
    a.add_argument("--iou", type=float, help="IoU threshold overriding the file")
    return p


def _emit(text: str, args) -> None:
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _table(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def _records_out(obj: dict, args) -> str:
    return _table([obj]) if args.format == "csv" else _json(obj)


def _load_config(args) -> cfgmod.Config:
    return cfgmod.load(args.config) if args.config else cfgmod.default_config()


def cmd_ik(args, cfg):
    j = K.inverse_kinematics(cfg.delta_geometry, Vec3(args.x, args.y, args.z))
    return _records_out({"theta1": j.theta1, "theta2": j.theta2, "theta3": j.theta3}, args)


def cmd_fk(args, cfg):
    p = K.forward_kinematics(cfg.delta_geometry, K.JointAngles(args.theta1, args.theta2, args.theta3))
    return _records_out({"x": p.x, "y": p.y, "z": p.z}, args)


def cmd_transform(args, cfg):
    d = cfg.detector
    f = delta_to_camera if args.inverse else camera_to_delta
    p = f(Vec3(args.x, args.y, args.z), d.camera_pitch, d.camera_offset)
    return _records_out({"x": p.x, "y": p.y, "z": p.z}, args)


def cmd_synth_tactile(args, cfg):
    tc = cfg.tactile
    seed = args.seed if args.seed is not None else tc.dataset_seed
    n = args.n_per_class if args.n_per_class is not None else tc.n_per_class
    noise = args.noise if args.noise is not None else tc.noise_sigma
    ds = T.generate_dataset(args.kind, n, noise, seed)
    if args.format == "csv":
        buf = io.StringIO()
        T.write_frames_csv(buf, ds.kind, ds.frames, ds.labels)
        return buf.getvalue()
    return json.dumps(ds.to_json()) + "\n"


def cmd_train_classifier(args, cfg):
    split_seed = args.seed if args.seed is not None else cfg.tactile.dataset_seed
    ds = T.TactileDataset.load(args.data, split_seed)
    tc = cfg.train
    if args.seed is not None:
        tc = dataclasses.replace(tc, seed=args.seed)
    if args.epochs is not None:
        tc = dataclasses.replace(tc, epochs=args.epochs)
    m = C.train(ds, tc)
    print(f"{ds.kind.value}: best validation accuracy {m.best_val_accuracy:.4f}", file=sys.stderr)
    return json.dumps(m.to_json()) + "\n"


def cmd_classify(args, cfg):
    m = C.CnnModel.load(args.model)
    kinds, frames, labels = T.read_frames_csv(args.data)
    if any(k is not m.kind for k in kinds):
        raise MobileChargerError(f"model is {m.kind.value} but data holds other kinds")
    pred = C.classify_batch(m, frames) if len(frames) else np.zeros(0, dtype=int)
    rows = [{"index": i, "class": int(p), "value": m.kind.class_values[int(p)],
             "true_class": None if t < 0 else int(t)}
            for i, (p, t) in enumerate(zip(pred, labels))]
    if args.format == "csv":
        if not rows:
            return "index,class,value,true_class\n"
        return _table([{k: ("" if v is None else v) for k, v in r.items()} for r in rows])
    doc = {"kind": m.kind.value, "predictions": rows}
    known = [(r["class"], r["true_class"]) for r in rows if r["true_class"] is not None]
    if known:
        doc["accuracy"] = sum(p == t for p, t in known) / len(known)
    return _json(doc)


def cmd_simulate(args, cfg):
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.trials is not None:
        overrides["trials_per_omega"] = args.trials
    if args.no_classify:
        overrides["classify"] = False
    try:
        cfg = cfg.replace(experiment=dataclasses.replace(cfg.experiment, **overrides))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    records = experiment.run_experiment(cfg)
    rate = experiment.success_rate(records)
    print(f"{len(records)} trials, success rate {rate:.3f}", file=sys.stderr)
    if args.format == "csv":
        buf = io.StringIO()
        experiment.write_csv(records, buf)
        return buf.getvalue()
    return experiment.dumps_json(records)


def cmd_analyze(args, cfg):
    records = experiment.import_records(args.records)
    summary = experiment.summarize(records)
    if args.format == "csv":
        rows = [{"omega_deg": k, "success_rate": v}
                for k, v in summary["success_rate_by_omega"].items()]
        return _table(rows)
    return _json(summary)


def cmd_eval_detection(args, cfg):
    with open(args.input) as fh:
        e = detection.DetectionEval.from_json(json.load(fh))
    if args.iou is not None:
        e.iou_threshold = args.iou
    ap, p, r = detection.detection_metrics(e)
    return _records_out({"ap": ap, "precision": p, "recall": r,
                         "iou_threshold": e.iou_threshold}, args)


COMMANDS = {
    "ik": cmd_ik, "fk": cmd_fk, "transform": cmd_transform,
    "synth-tactile": cmd_synth_tactile, "train-classifier": cmd_train_classifier,
    "classify": cmd_classify, "simulate": cmd_simulate, "analyze": cmd_analyze,
    "eval-detection": cmd_eval_detection,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.print_default_config:
            _emit(cfgmod.dumps_default() + "\n", args)
            return EXIT_OK
        if args.command is None:
            raise UsageError("a subcommand is required (see --help)")
        cfg = _load_config(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        _emit(COMMANDS[args.command](args, cfg), args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MobileChargerError, OSError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
