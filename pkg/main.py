import argparse
import logging
import sys

from config.settings import LOG_FILE_PATH
from cli.commands import Invocation, run, COMMANDS, DEMOS

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="causal-sde",
        description="Simulate, intervene on and compare Levy-driven causal SDE systems.",
    )
    parser.add_argument("command", choices=sorted(COMMANDS), help="subcommand to run")
    parser.add_argument("name", nargs="?", help=f"demo name for 'demo' ({', '.join(DEMOS)})")
    parser.add_argument("--config", help="path to a JSON experiment config")
    parser.add_argument("--out", default="out", help="output directory (default: out)")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--paths", type=int)
    parser.add_argument("--delta", type=float)
    parser.add_argument("--horizon", type=float)
    parser.add_argument("--alpha", type=float)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "demo" and not args.name:
        print(f"demo needs a name: {', '.join(DEMOS)}")
        return 1

    logger.info(f"causal-sde '{args.command}' started (log: {LOG_FILE_PATH})")
    code = run(Invocation(
        command=args.command,
        config=args.config,
        out=args.out,
        name=args.name,
        seed=args.seed,
        paths=args.paths,
        delta=args.delta,
        horizon=args.horizon,
        alpha=args.alpha,
    ))
    logger.info(f"causal-sde stopped with exit code {code}.\n{'='*125}")
    return code


if __name__ == '__main__':
    sys.exit(main())
