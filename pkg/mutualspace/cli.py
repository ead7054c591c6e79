"""Cli entry point."""

import argparse
import datetime
import json
import logging
import pathlib
import sys
import time
from typing import List, Optional

import pydantic

from mutualspace import __version__
from mutualspace.config import Method, RunConfig, parse_methods
from mutualspace.corpus import load_corpus
from mutualspace.corpus.create_corpus import write_corpus
from mutualspace.evaluation import (
    HOST_COUNTS,
    Condition,
    MetricsRecord,
    RunOutput,
    aggregate,
    build_mutual_space,
    log_summary,
    measure,
    report_csv,
    run_batch,
)
from mutualspace.floorplan import Context, load, loads
from mutualspace.misc import CB, OUT_ENV_VAR, B, C, ConfigError, G, MutualSpaceError, R, Y
from mutualspace.render import load_mutual_space, render_floorplan, render_mutual_space, save_svg

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_FAILED = 2


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("-v", "--verbose", action="store_true", default=False, help="Debug level logging.")
    parser.add_argument("--config", type=pathlib.Path, help="JSON run config. Flags override its values.")
    parser.add_argument("--seed", type=int, help="Optimizer seed, or corpus jitter seed for gen-corpus.")
    parser.add_argument(
        "--out",
        type=pathlib.Path,
        help=f"Output directory. Defaults to ${OUT_ENV_VAR} or ./out.",
    )


def parse_arguments(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """Get command line arguments."""
    parser = argparse.ArgumentParser(description=f"mutualspace {__version__}", add_help=True)
    commands = parser.add_subparsers(dest="command", required=True)

    match = commands.add_parser("match", help="Match client spaces onto a host space and write the mutual space.")
    _add_common(match)
    match.add_argument("host", help="Host floorplan JSON.")
    match.add_argument("clients", nargs="+", help="Client floorplan JSON file(s).")
    match.add_argument("--context", choices=[c.value for c in Context], help="Collaboration context.")
    match.add_argument("--method", choices=[m.value for m in Method], help="Matching method, follows --context if unset.")
    match.add_argument("--n-hosts", type=int, choices=HOST_COUNTS, help="Number of host users.")

    evaluate = commands.add_parser("evaluate", help="Run the space combination sweep and write the CSV report.")
    _add_common(evaluate)
    evaluate.add_argument("corpus", nargs="?", type=pathlib.Path, help="Corpus directory, built in corpus if unset.")
    evaluate.add_argument("--method", nargs="+", dest="methods", help="Methods to run, all by default.")
    evaluate.add_argument(
        "--conditions",
        nargs="+",
        choices=[c.value for c in Condition],
        help="Conditions to run, all by default.",
    )
    evaluate.add_argument("--n-hosts", nargs="+", type=int, choices=HOST_COUNTS, help="Host user counts to sweep.")
    evaluate.add_argument("--jobs", type=int, default=1, help="Worker processes.")

    render = commands.add_parser("render", help="Render a mutual space or floorplan JSON to SVG.")
    _add_common(render)
    render.add_argument("src", type=pathlib.Path, help="Mutual space, run output or floorplan JSON.")

    gen_corpus = commands.add_parser("gen-corpus", help="Write the authored floorplan corpus.")
    _add_common(gen_corpus)
    gen_corpus.add_argument("dest", nargs="?", type=pathlib.Path, help="Directory, <out>/corpus if unset.")

    print_config = commands.add_parser("print-config", help="Print the effective run config as JSON.")
    _add_common(print_config)

    args = parser.parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be at least 1")
    return args


def run_config(args: argparse.Namespace) -> RunConfig:
    """Config file, or defaults, with command line flags on top."""
    base = RunConfig.load(args.config) if args.config else RunConfig()
    n_hosts = getattr(args, "n_hosts", None)
    return base.with_overrides(
        context=getattr(args, "context", None),
        method=getattr(args, "method", None),
        seed=args.seed if args.command != "gen-corpus" else None,
        out=args.out,
        n_hosts=n_hosts if isinstance(n_hosts, int) else None,
    )


def cmd_match(args: argparse.Namespace, cfg: RunConfig) -> int:
    host = load(args.host)
    clients = [load(c) for c in args.clients]
    method = cfg.resolved_method()
    context = cfg.resolved_context()
    logger.info("%sMatching %s client(s) onto %s, %s in %s context", C, len(clients), host.id, method.value, context.value)
    space = build_mutual_space(method, host, clients, cfg, cfg.n_hosts, context=context)
    record = MetricsRecord(
        method=method.value,
        condition=f"H1-C{len(clients)}",
        combo_id=f"{host.id}__{'+'.join(c.id for c in clients)}",
        n_hosts=cfg.n_hosts,
        success=space.success,
        failure=space.failure,
        **measure(space, len(clients)),
    )
    out_dir = cfg.out_dir / "match" / record.combo_id
    json_path = out_dir / f"mutual_space_h{cfg.n_hosts}.json"
    json_path.parent.mkdir(parents=True, exist_ok=True)
    json_path.write_text(RunOutput(metrics=record, mutual_space=space).dumps(), encoding="utf-8")
    save_svg(render_mutual_space(space), json_path.with_suffix(".svg"))
    if not space.success:
        logger.error("%sNo mutual space: %s", R, space.failure)
        return EXIT_FAILED
    logger.info(
        "%sTotal interactable %.2f m^2, %sobstacle %.2f m^2",
        G,
        record.total_interactable,
        Y,
        record.total_obstacle,
    )
    for i, client in enumerate(space.clients):
        logger.info(
            "%s  %s (%s): interactable %.2f m^2, obstacle %.2f m^2",
            B,
            client.owner,
            client.plan_id,
            record.per_client_interactable[i],
            record.per_client_obstacle[i],
        )
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace, cfg: RunConfig) -> int:
    corpus = load_corpus(args.corpus)
    methods = parse_methods(args.methods)
    conditions = [Condition(c) for c in args.conditions] if args.conditions else list(Condition)
    host_counts = tuple(args.n_hosts) if args.n_hosts else HOST_COUNTS
    logger.info(
        "%sEvaluating %s on %s with hosts %s, %s job(s)",
        C,
        ", ".join(m.value for m in methods),
        ", ".join(c.value for c in conditions),
        ", ".join(str(n) for n in host_counts),
        args.jobs,
    )
    records = run_batch(corpus, cfg, methods, conditions, host_counts, cfg.out_dir, args.jobs)
    report = aggregate(records)
    path = report_csv(report, cfg.out_dir / "report.csv")
    log_summary(report)
    logger.info("%sWrote report to %s", G, path)
    return EXIT_OK


def cmd_render(args: argparse.Namespace, cfg: RunConfig) -> int:
    try:
        text = args.src.read_text(encoding="utf-8")
        data = json.loads(text)
    except FileNotFoundError as exc:
        raise ConfigError(f"no such file {args.src}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{args.src} is not JSON: {exc}") from exc
    if isinstance(data, dict) and "boundary" in data and "kind" in data:
        svg = render_floorplan(loads(text))
    else:
        try:
            svg = render_mutual_space(load_mutual_space(args.src))
        except pydantic.ValidationError as exc:
            raise ConfigError(f"{args.src} is not a mutual space: {exc.errors()[0]['msg']}") from exc
    dest = (args.out / f"{args.src.stem}.svg") if args.out else args.src.with_suffix(".svg")
    save_svg(svg, dest)
    return EXIT_OK


def cmd_gen_corpus(args: argparse.Namespace, cfg: RunConfig) -> int:
    dest = args.dest or cfg.out_dir / "corpus"
    write_corpus(dest, args.seed or 0)
    return EXIT_OK


def cmd_print_config(args: argparse.Namespace, cfg: RunConfig) -> int:
    print(cfg.dumps(resolved=True))
    return EXIT_OK


COMMANDS = {
    "match": cmd_match,
    "evaluate": cmd_evaluate,
    "render": cmd_render,
    "gen-corpus": cmd_gen_corpus,
    "print-config": cmd_print_config,
}


def process(args: argparse.Namespace) -> int:
    """Process arguments.

    Args:
        args: argparse.Namespace with parsed arguments.

    Returns:
        integer with exit code, 0 on success, 1 for bad input, 2 when no mutual space could be built.
    """
    start_time = time.time()
    try:
        cfg = run_config(args)
        code = COMMANDS[args.command](args, cfg)
    except MutualSpaceError as exc:
        logger.error("%s%s", R, exc)
        return EXIT_INPUT
    logger.debug("%sTook %s", CB, datetime.timedelta(seconds=time.time() - start_time))
    return code


def main(argv: Optional[List[str]] = None) -> None:
    """Entry point to cli."""
    args = parse_arguments(argv)

    for noisy in ("shapely", "concurrent.futures"):
        logging.getLogger(noisy).setLevel(logging.WARNING)
    logging.basicConfig(
        stream=sys.stdout,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(message)s",
        datefmt="%H:%M:%S",
    )
    sys.exit(process(args))


if __name__ == "__main__":
    main()
