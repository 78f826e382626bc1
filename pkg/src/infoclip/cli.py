"""Command-line front end: ``infoclip <command> ...``.

Exit codes: 0 success, 1 usage error, 2 data/format error,
3 numerical or convergence error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__, bench, lpam
from .config import format_run_config, load_run_config
from .errors import (
    ConvergenceError,
    DegenerateInputError,
    DimensionError,
    FormatError,
    InfoClipError,
    InputError,
    UnsupportedError,
)
from .gradcheck import run_gradcheck
from .losses import LossWeights, compression_loss, distillation_loss, total_loss
from .measures import EntropySpec, gram_from_features, joint_entropy, mutual_information, renyi_entropy
from .metrics import emit_metrics, summary_dict, write_json
from .tensorfile import atomic_write_bytes, read_tensor, write_tensor

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def format_value(v: float) -> str:
    s = f"{v:.12f}"
    return s[1:] if s.startswith("-") and float(s) == 0.0 else s


def _features(path):
    x = read_tensor(path)
    return x if x.ndim == 2 else np.atleast_2d(x).T


def _spec(args) -> EntropySpec:
    return EntropySpec(args.alpha, args.method)


def _grams(args, paths):
    return [gram_from_features(_features(p), args.norm) for p in paths]


def cmd_entropy(args):
    print(format_value(renyi_entropy(_grams(args, [args.file])[0], _spec(args))))


def cmd_joint(args):
    print(format_value(joint_entropy(_grams(args, args.files), _spec(args))))


def cmd_mi(args):
    a, b = _grams(args, [args.a, args.b])
    print(format_value(mutual_information(a, b, _spec(args))))


def _print_breakdown(b):
    for key in ("task", "compression", "distillation", "total"):
        print(f"{key} {format_value(getattr(b, key))}")


def cmd_loss_c(args):
    lc = compression_loss(_features(args.dv), _features(args.dl), _features(args.r), args.include_teacher_entropy)
    _print_breakdown(total_loss(0.0, lc, 0.0, LossWeights(args.lambda1, args.lambda2)))


def cmd_loss_d(args):
    ld = distillation_loss(_features(args.r_teacher), _features(args.r_student))
    _print_breakdown(total_loss(0.0, 0.0, ld, LossWeights(args.lambda1, args.lambda2)))


def save_params(params: lpam.LpamParams, path):
    write_tensor(path, params.to_flat())


def load_params(path) -> lpam.LpamParams:
    return lpam.LpamParams.from_flat(read_tensor(path))


def cmd_lpam(args):
    dv, dl = _features(args.dv), _features(args.dl)
    if args.params:
        params = load_params(args.params)
    else:
        params = lpam.LpamParams.init(dv.shape[1], np.random.default_rng(args.seed))
    if args.save_params:
        save_params(params, args.save_params)
    write_tensor(args.out, lpam.alignment_map(dv, dl, params))


def cmd_gradcheck(args):
    res = run_gradcheck(args.seed, args.instances)
    print(f"loss_max_rel_error {res.loss_max_rel_error:.6e}")
    print(f"lpam_max_rel_error {res.lpam_max_rel_error:.6e}")
    print(f"max_rel_error {res.max_rel_error:.6e}")
    if res.max_rel_error > args.tol:
        print(f"gradient check failed: {res.max_rel_error:.3e} > {args.tol:.3e}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_synth(args):
    cfg = load_run_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scenes = [bench.generate_scene(cfg, i, args.split) for i in range(args.scenes)]
    write_tensor(out / "class_embeddings.ictf", scenes[0].class_embeddings)
    write_tensor(out / "seen_mask.ictf", scenes[0].seen_mask.astype(np.float64))
    for i, sc in enumerate(scenes):
        write_tensor(out / f"scene{i}_patches.ictf", sc.patch_embeddings)
        write_tensor(out / f"scene{i}_labels.ictf", sc.labels.astype(np.float64))


def cmd_train(args):
    cfg = load_run_config(args.config)
    report = bench.train_distill(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    emit_metrics(report, out / "metrics.jsonl")
    write_json(summary_dict(report), out / "summary.json")
    save_params(report.params, out / "lpam.ictf")
    write_tensor(out / "adapter_v.ictf", report.adapters.a_v)
    write_tensor(out / "adapter_l.ictf", report.adapters.a_l)
    atomic_write_bytes(out / "run.cfg", format_run_config(cfg).encode())
    fm = report.final_metrics
    print(f"final_mi {format_value(report.final_mi)}")
    for key in ("seen_accuracy", "unseen_accuracy", "miou"):
        if key in fm:
            print(f"{key} {format_value(fm[key])}")
    print(f"wall_clock {report.wall_clock:.3f}s", file=sys.stderr)


def cmd_eval(args):
    cfg = load_run_config(args.config)
    model = Path(args.model)
    params = load_params(model / "lpam.ictf")
    adapters = bench.StudentAdapter(read_tensor(model / "adapter_v.ictf"), read_tensor(model / "adapter_l.ictf"))
    scenes = bench.eval_scenes(cfg)
    if not scenes:
        raise InputError("config has eval_scenes = 0")
    metrics = bench.evaluate(params, adapters, scenes)
    if args.out:
        write_json(metrics, args.out)
    for key in ("accuracy", "seen_accuracy", "unseen_accuracy", "miou", "seen_miou", "unseen_miou"):
        print(f"{key} {format_value(metrics[key])}")


def cmd_version(args):
    print(f"infoclip {__version__}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="infoclip", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def entropy_flags(p):
        p.add_argument("--alpha", type=float, default=2.0)
        p.add_argument("--method", choices=("eigen", "frobenius"), default="frobenius")
        p.add_argument("--norm", choices=("trace", "diagonal"), default="trace")

    p = sub.add_parser("entropy", help="matrix-based Renyi entropy of one feature batch")
    p.add_argument("file")
    entropy_flags(p)
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("joint", help="joint entropy of several feature batches")
    p.add_argument("files", nargs="+")
    entropy_flags(p)
    p.set_defaults(func=cmd_joint)

    p = sub.add_parser("mi", help="mutual information between two feature batches")
    p.add_argument("a")
    p.add_argument("b")
    entropy_flags(p)
    p.set_defaults(func=cmd_mi)

    def weight_flags(p):
        p.add_argument("--lambda1", type=float, default=1.0)
        p.add_argument("--lambda2", type=float, default=1.0)

    p = sub.add_parser("loss-c", help="compression loss of (patch, class, alignment) batches")
    p.add_argument("dv")
    p.add_argument("dl")
    p.add_argument("r")
    p.add_argument("--include-teacher-entropy", action="store_true")
    weight_flags(p)
    p.set_defaults(func=cmd_loss_c)

    p = sub.add_parser("loss-d", help="distillation loss of teacher/student alignment batches")
    p.add_argument("r_teacher")
    p.add_argument("r_student")
    weight_flags(p)
    p.set_defaults(func=cmd_loss_d)

    p = sub.add_parser("lpam", help="alignment map of patch and class embeddings")
    p.add_argument("dv")
    p.add_argument("dl")
    p.add_argument("--out", required=True)
    p.add_argument("--params", help="parameter checkpoint; default: fresh init from --seed")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--save-params")
    p.set_defaults(func=cmd_lpam)

    p = sub.add_parser("gradcheck", help="finite-difference check of all analytic gradients")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--instances", type=int, default=20)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("synth", help="write synthetic scenes as tensor files")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scenes", type=int, default=1)
    p.add_argument("--split", choices=("train", "eval"), default="eval")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="run teacher-student distillation on synthetic scenes")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained model directory")
    p.add_argument("--config", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("version")
    p.set_defaults(func=cmd_version)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args) or EXIT_OK
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UnsupportedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FormatError, DimensionError, InputError, DegenerateInputError, InfoClipError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
