"""Command-line surface: fit, anonymize, evaluate, and report.

Verbs
-----
fit-linear   closed-form codec design from a data CSV and a task matrix
fit-general  gradient-trained codec from data, targets, and a config file
anonymize    apply a saved codec to a data CSV under a seeded noise stream
evaluate     Monte-Carlo task loss of a saved codec on a data CSV
theory       closed-form comparison curves for a given task spectrum
sensitivity  exact L1 sensitivity report for raw or encoded data

Exit codes: 0 success, 2 input validation, 3 numerical failure. Every
output file is byte-deterministic given identical inputs and --seed;
stdout carries a single summary line per invocation.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import errors
from .data_io import load_config, load_csv, save_csv
from .linear_solver import (
    LinearCodec,
    curve_table_csv,
    monte_carlo_loss,
    solve_privacy_agnostic,
    solve_task_agnostic,
    solve_task_aware,
    theory_curves,
)
from .mechanism import LaplaceMechanism, calibrate, report_text, sample_noise, sensitivity_exact
from .neural import forward, make_net, pretrain_task
from .trainer import (
    NetCodec,
    evaluate as evaluate_net_codec,
    linear_codec_seed,
    mlp_codec_seed,
    train_privacy_agnostic,
    train_task_agnostic,
    train_task_aware,
)
from .whitening import build_task, fit_whitening, whiten_rows

VALIDATION_ERRORS = (
    errors.ParseError,
    errors.DimensionMismatch,
    errors.NonPositiveEpsilon,
    errors.BadLatentDim,
    errors.BadTarget,
    errors.EmptyData,
    errors.TooFewSamples,
    errors.ConstantColumn,
    ValueError,
    FileNotFoundError,
)

NUMERICAL_ERRORS = (
    errors.NotPositiveDefinite,
    errors.NoConvergence,
    errors.SingularTriangular,
    errors.SingularNoiselessEncoder,
    errors.AllEigenvaluesZero,
    errors.ScaleZero,
    errors.DivergenceError,
    errors.TapeMismatch,
)


def _float_list(text: str) -> list[float]:
    items = [tok for tok in text.split(",") if tok.strip()]
    if not items:
        raise ValueError("expected a non-empty comma-separated list")
    return [float(tok) for tok in items]


def _load_codec(path: str):
    first = Path(path).read_text(encoding="utf-8").splitlines()[0]
    if first == "taskldp-linear-codec v1":
        return LinearCodec.load(path)
    if first == "taskldp-net-codec v1":
        return NetCodec.from_text(Path(path).read_text(encoding="utf-8"))
    raise ValueError(f"unrecognized codec file header: {first!r}")


def _cmd_fit_linear(args) -> int:
    if args.epsilon <= 0:
        raise errors.NonPositiveEpsilon("epsilon must be positive")
    data = load_csv(args.data, has_header=args.has_header)
    task_matrix = load_csv(args.task_matrix).values
    if task_matrix.shape[1] != data.dim:
        raise errors.DimensionMismatch(
            f"task-matrix has {task_matrix.shape[1]} columns, data has {data.dim}"
        )
    model = fit_whitening(data)
    whitened = whiten_rows(model, data.values)
    task = build_task(model, task_matrix)

    if args.approach == "aware":
        codec, report = solve_task_aware(task, whitened, args.epsilon, model=model)
        report_body = report.to_text()
        loss = report.predicted_loss
    elif args.approach == "task-agnostic":
        codec, loss = solve_task_agnostic(model, task, whitened, args.epsilon)
        report_body = f"predicted_loss = {loss:.17g}\n"
    else:
        codec, loss = solve_privacy_agnostic(
            task, whitened, args.epsilon, args.z, model=model
        )
        report_body = f"predicted_loss = {loss:.17g}\nlatent_dim = {args.z}\n"

    codec.save(args.out)
    Path(args.report).write_text(
        f"approach = {args.approach}\nepsilon = {args.epsilon:.17g}\n"
        f"delta1 = {codec.delta1:.17g}\nsigma_w2 = {codec.noise_variance:.17g}\n"
        + report_body,
        encoding="utf-8",
    )
    print(
        f"fit-linear {args.approach}: predicted loss {loss:.6g}, "
        f"codec -> {args.out}, report -> {args.report}"
    )
    return 0


def _cmd_fit_general(args) -> int:
    if args.epsilon <= 0:
        raise errors.NonPositiveEpsilon("epsilon must be positive")
    config = load_config(args.config)
    if args.seed is not None:
        from dataclasses import replace

        config = replace(config, seed=args.seed)
    data = load_csv(args.data, has_header=args.has_header)
    targets = load_csv(args.targets).values
    if targets.shape[0] != data.num_samples:
        raise errors.DimensionMismatch("targets row count must match data")
    from .data_io import normalize

    normalized, _ = normalize(data, mode=config.mode)
    task_hidden = (args.task_hidden,) if args.task_hidden else ()
    task_net, pre_loss = pretrain_task(
        normalized.values,
        targets,
        hidden_dims=task_hidden,
        epochs=args.pretrain_epochs,
        loss=args.loss,
        seed=config.seed,
    )
    dim = normalized.dim
    if args.approach == "task-agnostic":
        decoder_seed = make_net([dim, dim], ["identity"], seed=config.seed)
        codec, trace = train_task_agnostic(
            normalized, decoder_seed, task_net, args.loss, args.epsilon, config
        )
    else:
        if args.codec_hidden:
            seed_codec = mlp_codec_seed(
                dim, config.z, args.codec_hidden, task_net, args.loss,
                args.epsilon, seed=config.seed,
            )
        else:
            seed_codec = linear_codec_seed(
                dim, config.z, task_net, args.loss, args.epsilon, seed=config.seed
            )
        train = train_task_aware if args.approach == "aware" else train_privacy_agnostic
        codec, trace = train(normalized, seed_codec, config)

    Path(args.out).write_text(codec.to_text(), encoding="utf-8")
    if args.trace:
        Path(args.trace).write_text(trace.to_csv(), encoding="utf-8")
    final = trace.records[-1].loss if trace.records else float("nan")
    print(
        f"fit-general {args.approach}: pretrain loss {pre_loss:.6g}, "
        f"final training loss {final:.6g}, codec -> {args.out}"
    )
    return 0


def _cmd_anonymize(args) -> int:
    codec = _load_codec(args.codec)
    data = load_csv(args.data, has_header=args.has_header)
    if isinstance(codec, LinearCodec):
        if data.dim != codec.dim:
            raise errors.DimensionMismatch(
                f"data has {data.dim} columns, codec expects {codec.dim}"
            )
        released = codec.anonymize_rows(data.values, seed=args.seed)
    else:
        if data.dim != codec.encoder.in_dim:
            raise errors.DimensionMismatch(
                f"data has {data.dim} columns, codec expects {codec.encoder.in_dim}"
            )
        latents, _ = forward(codec.encoder, data.values)
        mech = LaplaceMechanism(
            scale=codec.noise_scale, dim=codec.latent_dim, seed=args.seed
        )
        released, _ = forward(codec.decoder, latents + sample_noise(mech, data.num_samples))
    save_csv(args.out, released, column_names=data.column_names)
    print(f"anonymize: {data.num_samples} rows -> {args.out} (seed {args.seed})")
    return 0


def _cmd_evaluate(args) -> int:
    codec = _load_codec(args.codec)
    data = load_csv(args.data, has_header=args.has_header)
    if isinstance(codec, LinearCodec):
        if not args.task_matrix:
            raise ValueError("evaluate on a linear codec requires --task-matrix")
        task_matrix = load_csv(args.task_matrix).values
        mean, se = monte_carlo_loss(
            codec, data.values, task_matrix, args.noise_draws, seed=args.seed
        )
    else:
        mean, se = evaluate_net_codec(codec, data, args.noise_draws, seed=args.seed)
    Path(args.out).write_text(
        f"mean_loss = {mean:.17g}\nstd_error = {se:.17g}\n"
        f"noise_draws = {args.noise_draws}\nseed = {args.seed}\n",
        encoding="utf-8",
    )
    print(f"evaluate: mean loss {mean:.6g} +- {se:.3g} -> {args.out}")
    return 0


def _cmd_theory(args) -> int:
    lam = _float_list(args.lam)
    grid = _float_list(args.epsilon_grid)
    rows = theory_curves(lam, args.r, grid, latent_dim_pa=args.z_pa)
    Path(args.out).write_text(curve_table_csv(rows), encoding="utf-8")
    print(f"theory: {len(rows)} grid points -> {args.out}")
    return 0


def _cmd_sensitivity(args) -> int:
    data = load_csv(args.data, has_header=args.has_header)
    if args.codec:
        codec = _load_codec(args.codec)
        if isinstance(codec, LinearCodec):
            encoded = codec.encode_rows(data.values)
        else:
            encoded, _ = forward(codec.encoder, data.values)
    else:
        encoded = data.values
    report = sensitivity_exact(encoded)
    mech = calibrate(report.delta1, args.epsilon) if args.epsilon else None
    Path(args.out).write_text(report_text(report, mech), encoding="utf-8")
    print(f"sensitivity: delta1 {report.delta1:.6g} -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="taskldp",
        description="Task-aware local differential privacy for multi-dimensional data",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    fit_lin = sub.add_parser("fit-linear", help="closed-form codec design")
    fit_lin.add_argument("--data", required=True)
    fit_lin.add_argument("--task-matrix", required=True)
    fit_lin.add_argument("--epsilon", type=float, required=True)
    fit_lin.add_argument(
        "--approach",
        choices=("aware", "task-agnostic", "privacy-agnostic"),
        default="aware",
    )
    fit_lin.add_argument("--z", type=int, default=1, help="privacy-agnostic latent dim")
    fit_lin.add_argument("--has-header", action="store_true")
    fit_lin.add_argument("--out", default="codec.txt")
    fit_lin.add_argument("--report", default="report.txt")
    fit_lin.set_defaults(func=_cmd_fit_linear)

    fit_gen = sub.add_parser("fit-general", help="gradient-trained codec")
    fit_gen.add_argument("--data", required=True)
    fit_gen.add_argument("--targets", required=True)
    fit_gen.add_argument("--config", required=True)
    fit_gen.add_argument("--epsilon", type=float, required=True)
    fit_gen.add_argument(
        "--approach",
        choices=("aware", "task-agnostic", "privacy-agnostic"),
        default="aware",
    )
    fit_gen.add_argument(
        "--loss", choices=("squared_l2", "binary_cross_entropy"), default="squared_l2"
    )
    fit_gen.add_argument("--task-hidden", type=int, default=0)
    fit_gen.add_argument("--codec-hidden", type=int, default=0)
    fit_gen.add_argument("--pretrain-epochs", type=int, default=1000)
    fit_gen.add_argument("--seed", type=int, default=None, help="overrides config seed")
    fit_gen.add_argument("--has-header", action="store_true")
    fit_gen.add_argument("--out", default="codec.txt")
    fit_gen.add_argument("--trace", default="")
    fit_gen.set_defaults(func=_cmd_fit_general)

    anon = sub.add_parser("anonymize", help="apply a codec to data")
    anon.add_argument("--codec", required=True)
    anon.add_argument("--data", required=True)
    anon.add_argument("--seed", type=int, default=0)
    anon.add_argument("--has-header", action="store_true")
    anon.add_argument("--out", default="anonymized.csv")
    anon.set_defaults(func=_cmd_anonymize)

    ev = sub.add_parser("evaluate", help="Monte-Carlo loss of a codec")
    ev.add_argument("--codec", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--task-matrix", default="", help="required for linear codecs")
    ev.add_argument("--noise-draws", type=int, default=100)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--has-header", action="store_true")
    ev.add_argument("--out", default="evaluation.txt")
    ev.set_defaults(func=_cmd_evaluate)

    th = sub.add_parser("theory", help="closed-form comparison curves")
    th.add_argument("--lambda", dest="lam", required=True, help="comma list, non-increasing")
    th.add_argument("--r", type=float, required=True)
    th.add_argument("--epsilon-grid", required=True, help="comma list")
    th.add_argument("--z-pa", type=int, required=True)
    th.add_argument("--out", default="curves.csv")
    th.set_defaults(func=_cmd_theory)

    sens = sub.add_parser("sensitivity", help="exact L1 sensitivity report")
    sens.add_argument("--data", required=True)
    sens.add_argument("--codec", default="")
    sens.add_argument("--epsilon", type=float, default=0.0)
    sens.add_argument("--has-header", action="store_true")
    sens.add_argument("--out", default="sensitivity.txt")
    sens.set_defaults(func=_cmd_sensitivity)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NUMERICAL_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
