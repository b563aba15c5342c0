"""Command-line entry point: ``gramevo run|grammar|compare``."""
from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from importlib.resources import files
from pathlib import Path

from .benchmarks import BENCHMARKS, fitness_function, load_csv
from .evolution import ConfigError, EvolutionConfig, evolve
from .grammar import (
    Grammar,
    GrammarError,
    apply_function_grouping,
    enumerate_language,
    parse_bnf,
    parse_grouping,
    recursion_report,
    render,
)
from .stats import mann_whitney_u

EXIT_OK, EXIT_USAGE, EXIT_IO = 0, 1, 2
BUILTIN = "builtin:"
SPEC_KEYS = {"grammar", "grouping", "benchmark", "runs", "base_seed", "output_dir", "train_fraction"}
CONFIG_KEYS = {f.name: f.type for f in fields(EvolutionConfig) if f.name != "seed"}

log = logging.getLogger("gramevo")


class UsageError(Exception):
    pass


@dataclass
class ExperimentSpec:
    grammar: str
    benchmark: str
    config: EvolutionConfig
    runs: int = 1
    base_seed: int = 0
    output_dir: str = "results"
    grouping: str | None = None
    train_fraction: float = 0.7

    def echo(self) -> str:
        items = {k: v for k, v in asdict(self).items() if k != "config"}
        items.update({k: v for k, v in asdict(self.config).items() if k != "seed"})
        return "".join(f"{k} = {_fmt(v)}\n" for k, v in sorted(items.items()))


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return "" if value is None else str(value)


def _parse_value(key, raw, kind):
    try:
        if kind in (bool, "bool"):
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if kind in (int, "int"):
            return int(raw)
        if kind in (float, "float"):
            return float(raw)
    except ValueError:
        raise UsageError(f"bad value for {key}: {raw!r}") from None
    return raw


def read_spec(path) -> ExperimentSpec:
    """Parse a flat ``key = value`` experiment file; unknown keys are errors."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SPEC_KEYS and key not in CONFIG_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        if key in values:
            raise UsageError(f"{path}:{lineno}: duplicate key {key!r}")
        values[key] = value
    for key in ("grammar", "benchmark"):
        if key not in values:
            raise UsageError(f"{path}: missing required key {key!r}")

    base = path.parent
    config = {k: _parse_value(k, v, CONFIG_KEYS[k]) for k, v in values.items() if k in CONFIG_KEYS}
    try:
        cfg = EvolutionConfig(**config)
    except ConfigError as err:
        raise UsageError(str(err)) from None
    bench = values["benchmark"]
    if bench.startswith("csv:"):
        parts = bench.split(":")
        if len(parts) != 3:
            raise UsageError("csv benchmark must be 'csv:<path>:<target column>'")
        bench = f"csv:{_resolve(base, parts[1])}:{parts[2]}"
    elif bench not in BENCHMARKS:
        raise UsageError(f"unknown benchmark {bench!r}")
    spec = ExperimentSpec(
        grammar=_resolve(base, values["grammar"]),
        grouping=_resolve(base, values["grouping"]) if "grouping" in values else None,
        benchmark=bench,
        config=cfg,
        runs=_parse_value("runs", values.get("runs", "1"), int),
        base_seed=_parse_value("base_seed", values.get("base_seed", "0"), int),
        output_dir=str(base / values.get("output_dir", "results")),
        train_fraction=_parse_value("train_fraction", values.get("train_fraction", "0.7"), float),
    )
    if spec.runs < 1:
        raise UsageError("runs must be >= 1")
    for p in (spec.grammar, spec.grouping):
        if p and not p.startswith(BUILTIN) and not Path(p).exists():
            raise FileNotFoundError(p)
    return spec


def _resolve(base, value):
    return value if value.startswith(BUILTIN) else str(base / value)


def read_text(ref) -> str:
    """Read a file path or a packaged ``builtin:<name>`` resource."""
    if ref.startswith(BUILTIN):
        return (files("gramevo") / "grammars" / ref[len(BUILTIN):]).read_text(encoding="utf-8")
    return Path(ref).read_text(encoding="utf-8")


def load_grammar(path, grouping=None, n_features=1) -> Grammar:
    grammar = parse_bnf(read_text(path), n_features)
    if grouping:
        grammar = apply_function_grouping(grammar, parse_grouping(read_text(grouping)))
    return grammar


def load_dataset(spec: ExperimentSpec, seed):
    if spec.benchmark.startswith("csv:"):
        _, path, target = spec.benchmark.split(":")
        return load_csv(path, target, spec.train_fraction, seed)
    return BENCHMARKS[spec.benchmark]()


def run_columns(grammar: Grammar) -> list[str]:
    cols = ["generation", "best_fitness_train", "best_fitness_test", "mean_fitness", "best_phenotype"]
    cols += [f"mut_{n}" for n in grammar.names]
    cols += [f"p_{n}_{j}" for n in grammar.names for j in range(len(grammar.rules[n]))]
    return cols


def run_rows(runlog, grammar):
    for rec in runlog.records:
        row = [rec.generation, rec.best_fitness, rec.best_fitness_test, rec.mean_fitness, rec.best_phenotype]
        row += [rec.mean_rates[n] for n in grammar.names]
        row += [p for n in grammar.names for p in rec.probabilities[n]]
        yield [_fmt(v) for v in row]


def runlog_csv(runlog, grammar, seed) -> str:
    buf = io.StringIO()
    buf.write(f"# seed={seed}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(run_columns(grammar))
    w.writerows(run_rows(runlog, grammar))
    return buf.getvalue()


def run_single(spec: ExperimentSpec, run: int):
    seed = spec.base_seed + run
    data = load_dataset(spec, seed)
    grammar = load_grammar(spec.grammar, spec.grouping, data.n_features)
    cfg = EvolutionConfig(**{**asdict(spec.config), "seed": seed})
    test = fitness_function(data, "test") if len(data.test) else None
    runlog, best, _ = evolve(cfg, grammar, fitness_function(data, "train"), test)
    out = Path(spec.output_dir) / f"run_{seed}.csv"
    out.write_text(runlog_csv(runlog, grammar, seed), encoding="utf-8")
    best_test = test(best.derivation) if test else float("nan")
    return [run, seed, best.fitness, best_test, best.derivation.expression]


def cmd_run(spec: ExperimentSpec):
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    # validate inputs once before fanning out
    load_grammar(spec.grammar, spec.grouping, load_dataset(spec, spec.base_seed).n_features)
    workers = min(spec.runs, int(os.environ.get("GRAMEVO_THREADS", spec.runs) or spec.runs))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(run_single, [spec] * spec.runs, range(spec.runs)))
    else:
        rows = [run_single(spec, r) for r in range(spec.runs)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["run", "seed", "best_fitness_train", "best_fitness_test", "best_phenotype"])
    w.writerows([_fmt(v) for v in row] for row in rows)
    (out / "summary.csv").write_text(buf.getvalue(), encoding="utf-8")
    (out / "spec_echo.txt").write_text(spec.echo(), encoding="utf-8")
    return rows


def read_summary(directory) -> list[float]:
    path = Path(directory) / "summary.csv"
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
    if not rows:
        raise UsageError(f"{path} has no runs")
    return [float(r["best_fitness_train"]) for r in rows]


def cmd_compare(dir_a, dir_b, out=None):
    out = out or sys.stdout
    result = mann_whitney_u(read_summary(dir_a), read_summary(dir_b))
    print(f"n = {result.n_samples[0]} vs {result.n_samples[1]}", file=out)
    print(f"median best_fitness_train = {result.medians[0]!r} vs {result.medians[1]!r}", file=out)
    print(f"U = {result.u_statistic!r}", file=out)
    print(f"p (two-sided, {result.method}) = {result.p_value!r}", file=out)
    return result


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="gramevo", description="Grammar-based GP with adaptive facilitated mutation")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run a seeded batch of experiments")
    run.add_argument("--spec", required=True, help="experiment file (key = value lines)")

    gram = sub.add_parser("grammar", help="inspect or transform grammars")
    gsub = gram.add_subparsers(dest="action", required=True, parser_class=_Parser)
    check = gsub.add_parser("check", help="validate and report recursion")
    check.add_argument("grammar")
    tr = gsub.add_parser("transform", help="apply a function grouping")
    tr.add_argument("grammar")
    tr.add_argument("grouping")
    tr.add_argument("-o", "--output", help="write here instead of stdout")
    en = gsub.add_parser("enumerate", help="print the depth-bounded language")
    en.add_argument("grammar")
    en.add_argument("--depth", type=int, required=True)
    for sp in (check, tr, en):
        sp.add_argument("--features", type=int, default=1, help="expansion count for x[n]")

    cmp_ = sub.add_parser("compare", help="Mann-Whitney U on two result directories")
    cmp_.add_argument("dir_a")
    cmp_.add_argument("dir_b")
    return p


def _grammar_cmd(args):
    grammar = load_grammar(args.grammar, n_features=args.features)
    if args.action == "check":
        print(f"ok: {len(grammar.names)} non-terminals, {grammar.n_rules} rules, "
              f"start <{grammar.start}>, minimum depth {grammar.min_depth}")
        for line in recursion_report(grammar):
            print(line)
    elif args.action == "transform":
        text = render(apply_function_grouping(grammar, parse_grouping(read_text(args.grouping))))
        if args.output:
            Path(args.output).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
    else:
        if args.depth < 1:
            raise UsageError("--depth must be >= 1")
        for s in sorted(enumerate_language(grammar, args.depth)):
            print(s)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            rows = cmd_run(read_spec(args.spec))
            print(f"{len(rows)} run(s) written")
        elif args.command == "grammar":
            _grammar_cmd(args)
        else:
            cmd_compare(args.dir_a, args.dir_b)
    except (UsageError, GrammarError, ConfigError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
