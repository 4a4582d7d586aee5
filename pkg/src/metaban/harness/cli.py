"""Command-line entry point: ``metaban run|grid|ablate-nu|ingest``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..envs import RatingSpec, ingest_ratings
from ..envs.ratings import write_features
from ..errors import ConfigError
from .config import load_config
from .runner import run_ablation_nu, run_experiment, run_grid

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("metaban")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="experiment config (JSON)")
    p.add_argument("--out", help="output directory (overrides config)")
    p.add_argument("--seed", type=int, help="base seed (overrides config)")
    p.add_argument("--runs", type=int, help="runs per policy (overrides config)")
    p.add_argument("--horizon", type=int, help="rounds per run (overrides config)")
    p.add_argument("--jobs", type=int, help="parallel worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="metaban", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("run", help="run every configured policy"))
    _add_common(sub.add_parser("grid", help="grid-search alpha and lambda per policy"))
    ab = sub.add_parser("ablate-nu", help="Meta-Ban once per nu value, gamma fixed")
    _add_common(ab)
    ab.add_argument("--nu", type=float, nargs="+", help="nu values (overrides config)")
    ing = sub.add_parser("ingest", help="ratings CSV -> item features CSV")
    ing.add_argument("--ratings", required=True, help="CSV with user_id,item_id,rating")
    ing.add_argument("--out", required=True, help="output directory")
    ing.add_argument("--d", type=int, default=10, help="feature dimension")
    ing.add_argument("--top-users", type=int, default=2000)
    ing.add_argument("--top-items", type=int, default=10000)
    ing.add_argument("--seed", type=int, default=0)
    return parser


def _overrides(args):
    cfg = load_config(args.config)
    changes = {
        name: getattr(args, name)
        for name in ("out", "seed", "runs", "horizon", "jobs")
        if getattr(args, name, None) is not None
    }
    if getattr(args, "nu", None):
        changes["nu_values"] = tuple(args.nu)
    return cfg.replace(**changes) if changes else cfg


def _ingest(args) -> None:
    spec = RatingSpec(args.ratings, top_users=args.top_users, top_items=args.top_items,
                      d=args.d, seed=args.seed)
    env = ingest_ratings(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_features(out / "features.csv", env.items, env.features)
    print(f"wrote {len(env.items)} item features to {out / 'features.csv'}; "
          f"{len(env.users)} usable users")


def dispatch(args) -> None:
    if args.command == "ingest":
        _ingest(args)
        return
    cfg = _overrides(args)
    if args.command == "run":
        results, files = run_experiment(cfg)
        print(f"wrote {len(files['traces'])} traces, {files['summary']} and {files['plot']}")
    elif args.command == "grid":
        _, best = run_grid(cfg)
        print(json.dumps({k: {"alpha": c.alpha, "lambda": c.lam, "mean_final_cum_regret": c.mean_final}
                          for k, c in best.items()}, indent=2, sort_keys=True))
    elif args.command == "ablate-nu":
        _, files = run_ablation_nu(cfg)
        print(f"wrote {files['summary']}, {files['plot']} and {files['group_size']}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, UnicodeDecodeError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (FloatingPointError, ArithmeticError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # data-file parse errors from the ingest path
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_IO if args.command == "ingest" else EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
