"""Command-line entry point.

Subcommands run the pipeline up to the named stage (reusing cached
upstream stages) or generate a synthetic corpus::

    radsignals synth --out corpus/ --preset demo --seed 7
    radsignals all --config run.json --out results/ --threads 4

Exit codes: 0 ok, 2 configuration error, 3 data error, 4 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .pipeline import ConfigError, DataError, RunConfig, StageError, run_pipeline

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4

# subcommand -> last stage it runs
_UNTIL = {
    "ingest": "filter",
    "seeds": "validate",
    "lexicon": "lexicon",
    "signals": "signals",
    "cluster": "cluster",
    "analyze": "analyze",
    "report": "report",
    "all": "report",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _k_range(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(x) for x in text.replace(",", "-").split("-"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO-HI, got {text!r}") from None
    return lo, hi


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="radsignals", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log stage progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in _UNTIL:
        s = sub.add_parser(name, help=f"run the pipeline through the {_UNTIL[name]} stage")
        s.add_argument("--config", help="JSON run configuration; flags override its values")
        s.add_argument("--input", nargs="+", help="tweet JSON-lines file(s), optionally gzipped")
        s.add_argument("--out", help="output directory")
        s.add_argument("--seed", type=int, help="RNG seed")
        s.add_argument("--threads", type=int, help="workers for the permutation test")
        s.add_argument("--k-range", type=_k_range, help="k-means range, e.g. 2-20")
        s.add_argument("--permutations", type=int, help="label shuffles for the null model")
        s.add_argument("--distance", choices=("euclidean", "cosine"))
    s = sub.add_parser("synth", help="write a synthetic corpus with ground truth")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--preset", choices=("demo", "archetype", "throughput"), default="demo")
    s.add_argument("--config", help="JSON synthetic-corpus spec (overrides --preset)")
    return p


def _run_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides = {
        "input": args.input,
        "out": args.out,
        "rng_seed": args.seed,
        "threads": args.threads,
        "k_range": args.k_range,
        "permutations": args.permutations,
        "distance": args.distance,
    }
    for key, val in overrides.items():
        if val is not None:
            setattr(cfg, key, val)
    return cfg


def _synth(args) -> int:
    from . import synth

    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"synthetic spec not found: {path}")
        spec = synth.SynthSpec.from_dict(json.loads(path.read_text(encoding="utf-8")))
    else:
        spec = {"demo": synth.demo_spec, "archetype": synth.archetype_spec,
                "throughput": synth.throughput_spec}[args.preset]()
    try:
        spec.validate()
    except ValueError as e:
        raise ConfigError(str(e)) from None
    corpus = synth.synth_corpus(spec, args.seed)
    paths = synth.write_synth(corpus, args.out, args.seed)
    print(json.dumps(paths, indent=2, sort_keys=True, default=str))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        if args.command == "synth":
            return _synth(args)
        cfg = _run_config(args)
        out = run_pipeline(cfg, _UNTIL[args.command])
        print(out)
        return EXIT_OK
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as e:
        print(f"error: {e}", file=sys.stderr)
        print(json.dumps(e.manifest, indent=2, sort_keys=True, default=str), file=sys.stderr)
        if isinstance(e.cause, ConfigError):
            return EXIT_CONFIG
        if isinstance(e.cause, DataError):
            return EXIT_DATA
        return EXIT_INTERNAL
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except Exception as e:  # noqa: BLE001 - last-resort exit code
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
