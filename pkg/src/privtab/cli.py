"""Command-line surface: schema, train, generate, evaluate, audit, accountant.

Every command is deterministic given (inputs, seed). Run directories are
self-describing: the resolved config that produced them is persisted next to
the artifacts. Exit codes: 0 success, 1 incomplete (e.g. iteration cap
before the budget), 2 config error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .errors import ConfigError, DataError, NumericError, PrivtabError
from .models.checkpoint import load_checkpoint, save_checkpoint
from .models.generator import Generator
from .privacy.accountant import epsilon_floor, get_epsilon
from .tabular.encoding import EncodedMatrix, decode, encode, write_csv
from .tabular.schema import IngestReport, TableSchema, infer_schema, read_csv
from .trainer import (
    ACCOUNTANT_COLUMNS,
    TrainConfig,
    accountant_trace_to_csv,
    checkpoint_arrays,
    read_accountant_trace,
    replay_tallies,
    trace_to_csv,
    train,
)

EXIT_OK = 0
EXIT_INCOMPLETE = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _atomic_write(path, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _parse_overrides(pairs) -> dict:
    out = {}
    for pair in pairs or ():
        if ":" not in pair:
            raise ConfigError(f"--force expects kind:column, got {pair!r}")
        kind, column = pair.split(":", 1)
        out[column] = kind
    return out


def _load_schema_for(csv_path, args) -> TableSchema:
    if getattr(args, "schema", None):
        with open(args.schema, "r", encoding="utf-8") as fh:
            return TableSchema.from_dict(json.load(fh))
    return infer_schema(
        csv_path,
        overrides=_parse_overrides(getattr(args, "force", None)),
        target=getattr(args, "target", None),
        positive_class=getattr(args, "positive_class", None),
    )


def _read_encoded(csv_path, schema: TableSchema, provenance: str) -> EncodedMatrix:
    if not os.path.exists(csv_path):
        raise DataError(f"no such file: {csv_path}")
    from .tabular.schema import drop_missing

    header, rows = read_csv(csv_path)
    expected = [c.name for c in schema.columns]
    if header != expected:
        raise DataError(f"csv header {header} does not match schema columns {expected}")
    rows = drop_missing(rows)
    return encode(rows, schema, provenance=provenance)


# ---------------------------------------------------------------------------
# subcommands

def cmd_schema(args) -> int:
    report = IngestReport()
    schema = infer_schema(
        args.csv,
        overrides=_parse_overrides(args.force),
        target=args.target,
        positive_class=args.positive_class,
        report=report,
    )
    doc = schema.to_dict()
    doc["ingest"] = {"rows_kept": report.n_rows, "rows_dropped_missing": report.n_dropped_missing}
    text = json.dumps(doc, indent=2, sort_keys=True)
    if args.out:
        _atomic_write(args.out, text + "\n")
    print(text)
    return EXIT_OK


def _resolve_train_config(args) -> TrainConfig:
    doc: dict = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            try:
                doc.update(json.load(fh))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file {args.config}: {exc}") from None
    flag_map = {
        "epsilon_target": args.epsilon_target,
        "delta": args.delta,
        "teachers": args.teachers,
        "sigma": args.sigma,
        "batch_size": args.batch,
        "student_steps": args.student_steps,
        "max_outer_iterations": args.max_iterations,
        "student_kind": args.student,
        "lr": args.lr,
        "seed": args.seed,
        "checkpoint_every": args.checkpoint_every,
        "threads": args.threads,
    }
    for key, value in flag_map.items():
        if value is not None:
            doc[key] = value
    if args.no_rdp_clamp:
        doc["rdp_clamp"] = False
    if args.teacher_warm_start:
        doc["teacher_warm_start"] = True
    return TrainConfig.from_dict(doc)


def cmd_train(args) -> int:
    config = _resolve_train_config(args)
    schema = _load_schema_for(args.csv, args)
    data = _read_encoded(args.csv, schema, provenance="real")

    os.makedirs(args.out_dir, exist_ok=True)
    resolved = {"dataset": args.csv, "config": config.to_dict(), "version": __version__}
    _atomic_write(os.path.join(args.out_dir, "resolved_config.json"),
                  json.dumps(resolved, indent=2, sort_keys=True) + "\n")
    _atomic_write(os.path.join(args.out_dir, "schema.json"), schema.to_json() + "\n")

    ckpt_path = os.path.join(args.out_dir, "checkpoint.bin")

    def hooks(iteration, row, generator, student, ledger):
        if config.checkpoint_every and iteration % config.checkpoint_every == 0:
            arrays = dict(generator.named_arrays())
            arrays.update(student.named_arrays())
            save_checkpoint(ckpt_path, arrays, schema.to_dict(), meta={
                "config": config.to_dict(),
                "iteration": iteration,
                "epsilon_hat": get_epsilon(ledger).value,
            })

    result = train(data, config, hooks=hooks)

    _atomic_write(os.path.join(args.out_dir, "trace.csv"), trace_to_csv(result.trace))
    if args.trace:
        _atomic_write(os.path.join(args.out_dir, "accountant_trace.csv"),
                      accountant_trace_to_csv(result.accountant_trace))
    save_checkpoint(ckpt_path, checkpoint_arrays(result), schema.to_dict(), meta={
        "config": config.to_dict(),
        "iteration": result.iterations,
        "epsilon_hat": result.epsilon.value,
        "delta": result.epsilon.delta,
        "argmin_order": result.epsilon.argmin_order,
        "stopped_by": result.stopped_by,
    })
    summary = {
        "epsilon_hat": result.epsilon.value,
        "delta": result.epsilon.delta,
        "argmin_order": result.epsilon.argmin_order,
        "iterations": result.iterations,
        "stopped_by": result.stopped_by,
        "labels_released": result.ledger.released,
        "shard_sizes": result.shard_sizes,
    }
    _atomic_write(os.path.join(args.out_dir, "summary.json"),
                  json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK if result.stopped_by == "budget" else EXIT_INCOMPLETE


def _generator_from_checkpoint(path) -> tuple[Generator, dict]:
    if not os.path.exists(path):
        raise DataError(f"no such checkpoint: {path}")
    arrays, schema_doc, meta = load_checkpoint(path)
    schema = TableSchema.from_dict(schema_doc)
    gen = Generator(schema, np.random.default_rng(0))
    named = gen.named_arrays()
    missing = [k for k in named if k not in arrays]
    if missing:
        raise DataError(f"checkpoint missing generator arrays: {missing[:3]}...")
    for name, arr in named.items():
        stored = arrays[name]
        if stored.shape != arr.shape:
            raise DataError(f"checkpoint array {name}: shape {stored.shape} != {arr.shape}")
        arr[...] = stored
    return gen, meta


def cmd_generate(args) -> int:
    gen, meta = _generator_from_checkpoint(args.checkpoint)
    if args.n < 1:
        raise ConfigError(f"-n must be >= 1, got {args.n}")
    values = gen.sample(args.n, np.random.default_rng(args.seed or 0), mode="sample")
    rows = decode(values, gen.schema)
    write_csv(args.out, [c.name for c in gen.schema.columns], rows)
    sidecar = os.path.splitext(args.out)[0] + ".schema.json"
    _atomic_write(sidecar, gen.schema.to_json() + "\n")
    print(json.dumps({"rows": args.n, "out": args.out, "schema": sidecar,
                      "epsilon_hat": meta.get("epsilon_hat")}, sort_keys=True))
    return EXIT_OK


def _tstr_inputs(args):
    from .evaluation.tstr import stratified_split

    if not os.path.exists(args.real):
        raise DataError(f"no such file: {args.real}")
    if args.synthetic:
        with open(os.path.splitext(args.synthetic)[0] + ".schema.json", "r", encoding="utf-8") as fh:
            schema = TableSchema.from_dict(json.load(fh))
        source = _read_encoded(args.synthetic, schema, provenance="synthetic")
        meta = {}
    elif args.checkpoint:
        gen, meta = _generator_from_checkpoint(args.checkpoint)
        schema = gen.schema
        source = gen
    else:
        raise ConfigError("evaluate/audit: pass --synthetic CSV or --checkpoint")

    real = _read_encoded(args.real, schema, provenance="real")
    _, y = real.features_and_labels()
    _, test_idx = stratified_split(y, test_frac=args.test_frac, seed=args.seed or 0)
    real_test = EncodedMatrix(real.values[test_idx], schema, provenance="real")
    eps = {"epsilon_hat": meta.get("epsilon_hat"), "delta": meta.get("delta")} if meta else None
    return source, real_test, eps


def cmd_evaluate(args) -> int:
    from .evaluation.tstr import label_swap_audit, plot_data_csv, tstr_evaluate

    source, real_test, eps = _tstr_inputs(args)
    seeds = list(range(args.seed or 0, (args.seed or 0) + args.runs))
    if args.swap_positive:
        doc = label_swap_audit(source, real_test, runs=args.runs, seeds=seeds,
                               n_synthetic=args.n_synthetic, strict=args.strict,
                               epsilon=eps, threads=args.threads or 0)
        text = json.dumps(doc, indent=2, sort_keys=True)
        if args.out:
            _atomic_write(args.out, text + "\n")
        print(text)
        return EXIT_OK

    report = tstr_evaluate(source, real_test, runs=args.runs, seeds=seeds,
                           n_synthetic=args.n_synthetic, strict=args.strict,
                           epsilon=eps, threads=args.threads or 0)
    if args.out:
        _atomic_write(args.out, report.to_json() + "\n")
    if args.csv:
        _atomic_write(args.csv, report.to_csv())
    if args.plot_data:
        for metric, text in plot_data_csv(report).items():
            _atomic_write(f"{args.plot_data}.{metric}.csv", text)
    print(report.to_json())
    return EXIT_OK


def cmd_audit(args) -> int:
    args.swap_positive = True
    return cmd_evaluate(args)


def cmd_accountant(args) -> int:
    what_if = {}
    for pair in args.what_if or ():
        if "=" not in pair:
            raise ConfigError(f"--what-if expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        if key not in ("sigma", "delta", "teachers"):
            raise ConfigError(f"--what-if supports sigma/delta/teachers, got {key!r}")
        what_if[key] = float(value) if key != "teachers" else int(value)

    if args.trace:
        rows = read_accountant_trace(args.trace)
        k = what_if.get("teachers", args.teachers)
        sigma = what_if.get("sigma", args.sigma)
        delta = what_if.get("delta", args.delta)
        if k is None or sigma is None or delta is None:
            raise ConfigError("accountant: --teachers, --sigma and --delta are required "
                              "(or recoverable via --what-if)")
        replayed = replay_tallies(
            [r.tally for r in rows], k=k, sigma=sigma, delta=delta,
            clamp=not args.no_rdp_clamp,
            batch_boundaries=[(r.outer_iteration, r.batch_index, r.label_index) for r in rows],
        )
        text = accountant_trace_to_csv(replayed)
        final = replayed[-1].epsilon_hat_after if replayed else epsilon_floor(delta)
    else:
        if args.delta is None:
            raise ConfigError("accountant: --delta required without a trace")
        text = accountant_trace_to_csv([])
        final = epsilon_floor(args.delta)

    if args.out:
        _atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    print(json.dumps({"epsilon_hat": final}, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="privtab",
        description="Differentially private tabular synthesis: train a generator "
                    "under an (epsilon, delta) budget, sample synthetic rows, and "
                    "evaluate them with a train-on-synthetic/test-on-real harness.",
    )
    parser.add_argument("--version", action="version", version=f"privtab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("schema", help="infer a table schema from a CSV")
    p.add_argument("csv")
    p.add_argument("--force", action="append", metavar="KIND:COLUMN",
                   help="force a column kind (continuous/categorical/binary)")
    p.add_argument("--target", help="label column (default: last)")
    p.add_argument("--positive-class", help="raw value treated as positive (default: minority)")
    p.add_argument("-o", "--out", help="write schema JSON here as well as stdout")
    p.set_defaults(fn=cmd_schema)

    p = sub.add_parser("train", help="train the private generator on a CSV")
    p.add_argument("csv")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--config", help="JSON config file; flags override file values")
    p.add_argument("--schema", help="use a schema JSON instead of inferring")
    p.add_argument("--force", action="append", metavar="KIND:COLUMN")
    p.add_argument("--target")
    p.add_argument("--positive-class")
    p.add_argument("--epsilon-target", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--teachers", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--student-steps", type=int)
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--student", choices=("transformer", "mlp"))
    p.add_argument("--lr", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--checkpoint-every", type=int)
    p.add_argument("--trace", action="store_true", help="emit per-label accountant trace CSV")
    p.add_argument("--no-rdp-clamp", action="store_true",
                   help="report the raw data-dependent cost even above alpha/sigma^2")
    p.add_argument("--teacher-warm-start", action="store_true",
                   help="initialise each teacher refresh from the previous fit")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("generate", help="sample synthetic rows from a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("-n", type=int, required=True)
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=cmd_generate)

    for name, fn in (("evaluate", cmd_evaluate), ("audit", cmd_audit)):
        p = sub.add_parser(name, help="TSTR evaluation" if name == "evaluate"
                           else "paired TSTR reports under both positive-class conventions")
        p.add_argument("--synthetic", help="synthetic CSV (with .schema.json sidecar)")
        p.add_argument("--checkpoint", help="generator checkpoint to sample from")
        p.add_argument("--real", required=True, help="real CSV; a stratified 20%% split is held out")
        p.add_argument("--runs", type=int, default=5)
        p.add_argument("--seed", type=int)
        p.add_argument("--n-synthetic", type=int)
        p.add_argument("--test-frac", type=float, default=0.2)
        p.add_argument("--strict", action="store_true",
                       help="exclude degraded runs from aggregate means")
        p.add_argument("--threads", type=int)
        p.add_argument("-o", "--out", help="report JSON path")
        p.add_argument("--csv", help="flattened CSV path")
        p.add_argument("--plot-data", help="prefix for per-metric plot-data CSVs")
        if name == "evaluate":
            p.add_argument("--swap-positive", action="store_true",
                           help="emit the paired label-swap audit instead")
        p.set_defaults(fn=fn)

    p = sub.add_parser("accountant", help="replay or explore a tally trace")
    p.add_argument("--trace", help="accountant trace CSV from a --trace training run")
    p.add_argument("--teachers", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--what-if", action="append", metavar="KEY=VALUE",
                   help="recompute under different sigma/delta/teachers")
    p.add_argument("--no-rdp-clamp", action="store_true")
    p.add_argument("-o", "--out", help="epsilon curve CSV path (default: stdout)")
    p.set_defaults(fn=cmd_accountant)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except PrivtabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INCOMPLETE


if __name__ == "__main__":
    sys.exit(main())
