"""zeroreg-extract: RGB-D sequence to scene-bundle directory."""

import argparse
import json
import sys

from .config import load_config
from .errors import BackendError, ConfigError, ExtractorError, SequenceError
from .extract import extract_bundle
from .sequence import make_demo_sequence


def run(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="zeroreg-extract")
    parser.add_argument("--config", help="extractor config JSON")
    parser.add_argument("--out", required=True, help="bundle output directory")
    parser.add_argument("--make-demo-sequence", action="store_true",
                        help="write a synthetic depth sequence to --out instead of extracting")
    parser.add_argument("--frames", type=int, default=6, help="demo sequence frame count")
    parser.add_argument("--seed", type=int, default=0, help="demo sequence seed")
    parser.add_argument("--json", action="store_true")
    args = parser.parse_args(argv)

    try:
        if args.make_demo_sequence:
            path = make_demo_sequence(args.out, frames=args.frames, seed=args.seed)
            doc = {"sequence": str(path), "frames": args.frames}
        else:
            if not args.config:
                parser.error("--config is required unless --make-demo-sequence is given")
            config = load_config(args.config)
            path = extract_bundle(config, args.out)
            doc = {"bundle": str(path), "backend": config.backend}
    except (ConfigError, SequenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (BackendError, ExtractorError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.json:
        print(json.dumps(doc))
    else:
        print(" ".join(f"{k}={v}" for k, v in doc.items()))
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
