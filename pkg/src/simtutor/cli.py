"""Command-line entry point: run studies, report on logs, generate items.

Exit codes: 0 success, 1 usage or configuration error, 2 simulation or
generation failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import random
import sys
import time
from pathlib import Path

from . import __version__
from .analytics import (
    DesignError,
    SeparationError,
    accuracy_by_condition,
    curve_rows,
    fit_logistic,
    hard_problem_effect,
    learning_curve,
    posttest_effect,
)
from .experiment import (
    box_arrows_config,
    fractions_config,
    read_transactions,
    run_study,
    write_transactions,
)
from .state import ConfigError, GenerationError
from .tutors import gen_box_problem, gen_fraction_problem

STUDY_NAMES = {"fractions": "fractions", "box-arrows": "box_arrows"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser():
    parser = _Parser(prog="simtutor", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a study end to end")
    run.add_argument("study", choices=sorted(STUDY_NAMES))
    run.add_argument("--config", type=Path, help="JSON config file; flags win")
    run.add_argument("--agents", type=int)
    run.add_argument("--replications", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--jobs", type=int)
    run.add_argument("--out", type=Path, help="output directory")

    report = sub.add_parser("report", help="summarize a transactions.csv")
    report.add_argument("log", type=Path)

    gen = sub.add_parser("gen-problems", help="emit generated items as JSON lines")
    gen.add_argument("study", choices=sorted(STUDY_NAMES))
    gen.add_argument("--type", dest="problem_type", required=True)
    gen.add_argument("-n", "--count", type=int, default=10)
    gen.add_argument("--seed", type=int, default=7)
    gen.add_argument("--constraint", choices=("constrained", "unconstrained"),
                     default="constrained")
    return parser


def _load_config_file(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if isinstance(raw, dict) and "config" in raw:
        raw = raw["config"]  # accept a manifest as a config source
    return raw


def _resolve_config(args):
    overrides = {}
    if args.config:
        file_cfg = _load_config_file(args.config)
        for key in ("agents", "replications", "seed", "jobs"):
            if key in file_cfg:
                overrides["n_agents" if key == "agents" else key] = file_cfg[key]
    for key, attr in (("n_agents", "agents"), ("replications", "replications"),
                      ("seed", "seed"), ("jobs", "jobs")):
        value = getattr(args, attr)
        if value is not None:
            overrides[key] = value
    study = STUDY_NAMES[args.study]
    factory = fractions_config if study == "fractions" else box_arrows_config
    return factory(**overrides)


def _default_out(study, seed):
    root = Path(os.environ.get("SIMTUTOR_OUT", "runs"))
    return root / f"{study}_seed{seed}"


def _write_csv(path, rows):
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(rows)


def _regressions(config, records):
    if config.study == "fractions":
        models = {"tutor": fit_logistic, "posttest": posttest_effect}
    elif config.hard_only:
        models = {"hard_problems": hard_problem_effect}
    else:
        models = {"all_problems":
                  lambda recs: fit_logistic(recs, terms=("condition", "count"))}
    out = {}
    for name, fit in models.items():
        try:
            out[name] = fit(records)
        except (SeparationError, DesignError) as exc:
            # Valid on small runs; the log itself is still the product.
            out[name] = exc
    return out


def _cmd_run(args):
    config = _resolve_config(args)
    out = args.out or _default_out(config.study, config.seed)
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    records = run_study(config)
    write_transactions(out / "transactions.csv", records)
    _write_csv(out / "curves.csv", curve_rows(learning_curve(records)))

    summaries = _regressions(config, records)
    text_parts, reg_rows = [], [("model", "term", "odds_ratio", "ci_low",
                                 "ci_high", "p_value")]
    for model, summary in summaries.items():
        if isinstance(summary, Exception):
            text_parts.append(f"== {model} ==\nnot estimable: {summary}\n")
            continue
        text_parts.append(f"== {model} ==\n{summary.table()}\n")
        for term, est in summary.terms.items():
            reg_rows.append((model, term, f"{est.odds_ratio:.6f}",
                             f"{est.ci_low:.6f}", f"{est.ci_high:.6f}",
                             f"{est.p_value:.6g}"))
    (out / "regression.txt").write_text("\n".join(text_parts))
    _write_csv(out / "regression.csv", reg_rows)

    manifest = {
        "tool": "simtutor",
        "version": __version__,
        "config": {
            "study": args.study,
            "agents": config.n_agents,
            "replications": config.replications,
            "seed": config.seed,
            "jobs": config.jobs,
        },
        "seed": config.seed,
        "outputs": ["transactions.csv", "curves.csv", "regression.txt",
                    "regression.csv"],
        "duration_seconds": round(time.time() - started, 3),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {out}")
    return 0


def _cmd_report(args):
    records = read_transactions(args.log)
    if not records:
        raise ConfigError("empty transaction log")
    is_box = any(r.problem_type.startswith("box_") for r in records)
    print(f"log: {args.log} ({len(records)} rows)")
    if is_box:
        print("hard-problem accuracy by condition:")
        hard = [r for r in records if r.problem_type == "box_hard"]
        for cond, acc in accuracy_by_condition(hard).items():
            print(f"  {cond:15s} {acc:.3f}")
        models = (("hard_problems", hard_problem_effect),)
    else:
        print("tutor accuracy by condition:")
        for cond, acc in accuracy_by_condition(records, "tutor").items():
            print(f"  {cond:15s} {acc:.3f}")
        print("posttest accuracy by condition:")
        for cond, acc in accuracy_by_condition(records, "posttest").items():
            print(f"  {cond:15s} {acc:.3f}")
        models = (("tutor", fit_logistic), ("posttest", posttest_effect))
    for model, fit in models:
        print(f"\n{model} regression:")
        try:
            print(fit(records).table())
        except (SeparationError, DesignError) as exc:
            print(f"not estimable: {exc}")
    return 0


def _cmd_gen_problems(args):
    study = STUDY_NAMES[args.study]
    rng = random.Random(args.seed)
    for i in range(args.count):
        if study == "fractions":
            script = gen_fraction_problem(args.problem_type, rng, f"gen-{i}")
        else:
            difficulty = {"box_easy": "easy", "box_hard": "hard"}.get(args.problem_type)
            if difficulty is None:
                raise ConfigError(f"unknown box problem type {args.problem_type!r}")
            script = gen_box_problem(difficulty, args.constraint, rng, f"gen-{i}")
        print(script.to_record())
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "report":
            return _cmd_report(args)
        return _cmd_gen_problems(args)
    except ConfigError as exc:
        print(f"simtutor: config error: {exc}", file=sys.stderr)
        return 1
    except (GenerationError, SeparationError, OSError) as exc:
        print(f"simtutor: failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
