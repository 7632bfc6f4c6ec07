"""Command-line front end.

One binary, subcommand style. All numeric knobs live in the config file
and can be overridden with repeated `--set key=value` flags (flags win).
Every command is a pure function of (inputs, config, seed); outputs are
byte-reproducible, and every report embeds the effective configuration
and toolkit version.

Exit codes: 0 success, 1 validation/data error, 2 missing input.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import __version__, diagnostics, metrics, mining, scorer, trainer
from .config import ConfigError, ExperimentConfig, apply_overrides, config_text, load_config
from .io import (DataFormatError, load_features, load_qrels, load_run, load_teacher,
                 teacher_lookup, write_run)
from .objectives import ObjectiveConfig  # noqa: F401  (re-exported for scripting)


def _load_cfg(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = dict(kv.split("=", 1) for kv in (args.set or []))
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = str(args.seed)
    apply_overrides(cfg, overrides)
    cfg.trainer.seed = cfg.seed
    return cfg


def _report_header(cfg: ExperimentConfig) -> str:
    body = "\n".join("# " + line for line in config_text(cfg).splitlines())
    return f"# ltrlab {__version__}\n# effective configuration:\n{body}\n"


def _write_report(path: str, cfg: ExperimentConfig, lines: list[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(_report_header(cfg))
        for line in lines:
            f.write(line + "\n")


def _fmt(value, decimals: int = 3) -> str:
    return "N/A" if value is None else f"{value:.{decimals}f}"


def cmd_rerank(args) -> int:
    cfg = _load_cfg(args)
    run = load_run(args.run)
    store = load_features(args.features)
    params = scorer.load_params(args.checkpoint)
    cutoff = args.cutoff if args.cutoff is not None else cfg.rerank_cutoff
    result = scorer.rerank(run, params, store, cutoff)
    os.makedirs(args.out, exist_ok=True)
    out_run = os.path.join(args.out, "reranked.run")
    write_run(result, out_run, tag="reranked")
    _write_report(os.path.join(args.out, "rerank_report.txt"), cfg, [
        f"input_run = {args.run}",
        f"checkpoint = {args.checkpoint}",
        f"cutoff = {cutoff}",
        f"queries = {len(result.by_query())}",
        f"entries = {len(result.entries)}",
        f"output = {out_run}",
    ])
    return 0


def cmd_train(args) -> int:
    cfg = _load_cfg(args)
    if args.no_pair:
        cfg.objective.enable_pair = False
    if args.no_teacher:
        cfg.objective.enable_teacher = False
    if args.no_point:
        cfg.objective.enable_point = False
    cfg.validate()
    groups = mining.load_groups(args.groups)
    store = load_features(args.features)
    init = scorer.load_params(args.init) if args.init else None
    params, report = trainer.train(groups, store, cfg.objective, cfg.trainer, init=init)
    os.makedirs(args.out, exist_ok=True)
    ckpt = os.path.join(args.out, "checkpoint.txt")
    scorer.save_params(params, ckpt)
    lines = [f"groups = {len(groups)}", f"steps = {report['steps']}", f"checkpoint = {ckpt}"]
    for row in report["epochs"]:
        lines.append(
            "epoch {epoch}: mean_total = {mean_total:.6f} mean_pair = {mean_pair:.6f} "
            "mean_teacher = {mean_teacher:.6f} mean_point = {mean_point:.6f}".format(**row))
    lines.append("lr_trace = " + ",".join(f"{lr:.10g}" for lr in report["lr_trace"]))
    _write_report(os.path.join(args.out, "training_report.txt"), cfg, lines)
    return 0


def cmd_mine(args) -> int:
    cfg = _load_cfg(args)
    run = load_run(args.run)
    qrels, _warn = load_qrels(args.qrels)
    judgments = teacher_lookup(load_teacher(args.teacher))
    groups, skipped = mining.assemble_groups(run, qrels, judgments, cfg.mining, cfg.seed)

    counts = {"trusted": 0, "suspected": 0, "hard": 0}
    for qid, ents in run.by_query().items():
        if qrels.positive(qid) is None:
            continue
        part = mining.partition_candidates(qid, [e.video_id for e in ents], qrels,
                                           judgments, cfg.mining)
        counts["trusted"] += len(part.trusted_negatives)
        counts["suspected"] += len(part.suspected_positives)
        counts["hard"] += len(part.hard_negatives)

    os.makedirs(args.out, exist_ok=True)
    groups_path = os.path.join(args.out, "groups.jsonl")
    mining.write_groups(groups, groups_path)
    summary = mining.dataset_summary(groups)
    lines = [
        f"groups = {len(groups)}",
        f"trusted_negatives = {counts['trusted']}",
        f"suspected_positives = {counts['suspected']}",
        f"hard_negatives = {counts['hard']}",
        f"total_records = {summary['total_records']}",
        f"positive_pairs = {summary['positive_pairs']}",
        f"negative_pairs = {summary['negative_pairs']}",
        f"mean_candidates_per_query = {summary['mean_candidates_per_query']:.4f}",
        "negatives_histogram = " + ",".join(
            f"{k}:{v}" for k, v in summary["negatives_per_query_histogram"].items()),
        f"output = {groups_path}",
    ]
    for qid, reason in sorted(skipped.items()):
        lines.append(f"skipped {qid}: {reason}")
    _write_report(os.path.join(args.out, "mining_report.txt"), cfg, lines)
    return 0


def cmd_filter(args) -> int:
    cfg = _load_cfg(args)
    run = load_run(args.run)
    qrels, _warn = load_qrels(args.qrels)
    judgments = teacher_lookup(load_teacher(args.teacher))
    kept, report = mining.filter_queries(run, qrels, judgments, cfg.mining)
    os.makedirs(args.out, exist_ok=True)
    kept_path = os.path.join(args.out, "kept_queries.txt")
    with open(kept_path, "w", encoding="utf-8", newline="\n") as f:
        for qid in kept:
            f.write(qid + "\n")
    hist: dict[str, int] = {}
    for reason in report.values():
        hist[reason.split(":")[0]] = hist.get(reason.split(":")[0], 0) + 1
    lines = [f"kept = {len(kept)}", f"flagged = {len(report)}"]
    lines += [f"count {rule} = {n}" for rule, n in sorted(hist.items())]
    lines += [f"{qid}: {reason}" for qid, reason in sorted(report.items())]
    _write_report(os.path.join(args.out, "filter_report.txt"), cfg, lines)
    return 0


def cmd_eval(args) -> int:
    cfg = _load_cfg(args)
    run = load_run(args.run)
    qrels, _warn = load_qrels(args.qrels)
    cutoffs = cfg.metric_cutoffs
    report = metrics.evaluate(run, qrels, cutoffs)
    delta = None
    if args.baseline:
        base = metrics.evaluate(load_run(args.baseline), qrels, cutoffs)
        delta = metrics.delta_report(base, report)

    header = "metric    " + "".join(f"{'@' + str(k):>10}" for k in cutoffs)
    table = [header,
             "recall    " + "".join(f"{report.recall[k]:>10.3f}" for k in cutoffs),
             "ndcg      " + "".join(f"{report.ndcg[k]:>10.3f}" for k in cutoffs)]
    if delta:
        table.append("recall_d% " + "".join(f"{_fmt(delta.recall_delta_pct[k], 2):>10}" for k in cutoffs))
        table.append("ndcg_d%   " + "".join(f"{_fmt(delta.ndcg_delta_pct[k], 2):>10}" for k in cutoffs))
    table.append(f"queries = {report.query_count}, skipped (no relevant) = {report.skipped_queries}")

    keyed = []
    for k in cutoffs:
        keyed.append(f"recall@{k} = {report.recall[k]:.6f}")
        keyed.append(f"ndcg@{k} = {report.ndcg[k]:.6f}")
        if delta:
            keyed.append(f"recall_delta_pct@{k} = {_fmt(delta.recall_delta_pct[k], 2)}")
            keyed.append(f"ndcg_delta_pct@{k} = {_fmt(delta.ndcg_delta_pct[k], 2)}")
    keyed.append(f"queries = {report.query_count}")
    keyed.append(f"skipped_no_relevant = {report.skipped_queries}")

    print("\n".join(table))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_report(os.path.join(args.out, "eval_report.txt"), cfg, table)
        _write_report(os.path.join(args.out, "eval_metrics.txt"), cfg, keyed)
    return 0


def _load_scores_file(path: str) -> list[tuple[str, str, float]]:
    rows = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise DataFormatError(f"{path}:{lineno}: expected 'query video score'")
            try:
                rows.append((parts[0], parts[1], float(parts[2])))
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: bad score {parts[2]!r}") from None
    if not rows:
        raise DataFormatError(f"{path}: empty scores file")
    return rows


def cmd_diagnose(args) -> int:
    cfg = _load_cfg(args)
    rows = _load_scores_file(args.scores)
    qrels, _warn = load_qrels(args.qrels)
    rel = [s for q, v, s in rows if qrels.judgments.get((q, v), 0) > 0]
    non = [s for q, v, s in rows if qrels.judgments.get((q, v), 0) <= 0]
    os.makedirs(args.out, exist_ok=True)

    def dump_ecdf(values, path):
        curve = diagnostics.ecdf(values)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for x, p in zip(curve.values, curve.probabilities):
                f.write(f"{x:.10g} {p:.10g}\n")

    lines = [f"pairs = {len(rows)}", f"relevant = {len(rel)}", f"nonrelevant = {len(non)}"]
    if rel and non:
        dump_ecdf(rel, os.path.join(args.out, "ecdf_relevant.txt"))
        dump_ecdf(non, os.path.join(args.out, "ecdf_nonrelevant.txt"))
        sep = diagnostics.separation_stats(rel, non)
        lines += [f"mean_gap = {sep['mean_gap']:.6f}",
                  f"auc = {sep['auc']:.6f}",
                  f"overlap = {sep['overlap']:.6f}"]
    else:
        lines.append("separation = N/A (one class empty)")
    decomp = diagnostics.variance_decomposition(rows)
    lines += [f"r2_query_only = {_fmt(decomp.r2_query_only, 6)}",
              f"r2_video_only = {_fmt(decomp.r2_video_only, 6)}",
              f"r2_additive = {_fmt(decomp.r2_additive, 6)}",
              f"global_mean = {decomp.global_mean:.6f}"]
    _write_report(os.path.join(args.out, "diagnostics_report.txt"), cfg, lines)
    print("\n".join(lines))
    return 0


def cmd_gradcheck(args) -> int:
    cfg = _load_cfg(args)
    if args.trials < 1:
        print("error: --trials must be >= 1", file=sys.stderr)
        return 1
    result = trainer.grad_check(args.dim, args.group_size, args.trials, cfg.seed,
                                obj_cfg=cfg.objective)
    worst = result["max_relative_error"]
    if os.environ.get("LTRLAB_GRADCHECK_CORRUPT"):  # negative-control test hook
        worst += 1.0
    ok = worst < args.tolerance
    print(f"{'PASS' if ok else 'FAIL'}: max relative error {worst:.3e} "
          f"(tolerance {args.tolerance:.0e}, {args.trials} trials, dim {args.dim})")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_report(os.path.join(args.out, "gradcheck_report.txt"), cfg, [
            f"status = {'PASS' if ok else 'FAIL'}",
            f"max_relative_error = {worst:.6e}",
            f"tolerance = {args.tolerance:.6e}",
            f"trials = {args.trials}",
            f"dim = {args.dim}",
            f"group_size = {args.group_size}",
        ])
    return 0 if ok else 1


def cmd_summary(args) -> int:
    cfg = _load_cfg(args)
    groups = mining.load_groups(args.groups)
    summary = mining.dataset_summary(groups)
    lines = [
        f"total_records = {summary['total_records']}",
        f"positive_pairs = {summary['positive_pairs']}",
        f"negative_pairs = {summary['negative_pairs']}",
        f"mean_candidates_per_query = {summary['mean_candidates_per_query']:.4f}",
        "negatives_histogram = " + ",".join(
            f"{k}:{v}" for k, v in summary["negatives_per_query_histogram"].items()),
    ]
    print("\n".join(lines))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_report(os.path.join(args.out, "summary_report.txt"), cfg, lines)
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="keyed-text config file")
    p.add_argument("--seed", type=int, help="master seed (overrides config)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config key (repeatable; flags win)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ltrlab",
                                     description="Learning-to-rank toolkit CLI")
    parser.add_argument("--version", action="version", version=f"ltrlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rerank", help="rerank the head of a first-stage run")
    p.add_argument("--run", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--cutoff", type=int)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_rerank)

    p = sub.add_parser("train", help="train the scorer on query groups")
    p.add_argument("--groups", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--init", help="initial checkpoint (optional)")
    p.add_argument("--no-pair", action="store_true")
    p.add_argument("--no-teacher", action="store_true")
    p.add_argument("--no-point", action="store_true")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("mine", help="assemble training groups with mined negatives")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--teacher", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("filter", help="apply the query quality filters")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--teacher", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("eval", help="recall/nDCG report, optionally vs a baseline run")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--baseline")
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("diagnose", help="ECDF separation and variance decomposition")
    p.add_argument("--scores", required=True, help="3-column 'query video score' file")
    p.add_argument("--qrels", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("gradcheck", help="finite-difference gradient validation")
    p.add_argument("--dim", type=int, default=4)
    p.add_argument("--group-size", type=int, default=3)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("summary", help="dataset statistics over a groups file")
    p.add_argument("--groups", required=True)
    p.add_argument("--out")
    _add_common(p)
    p.set_defaults(func=cmd_summary)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: missing input: {exc.filename or exc}", file=sys.stderr)
        return 2
    except (DataFormatError, ConfigError, ValueError, KeyError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
