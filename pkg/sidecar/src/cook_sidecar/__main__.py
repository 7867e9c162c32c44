import argparse
import sys

from .app import ModelLoadError, serve
from .config import SidecarConfig, SidecarConfigError, load_config


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="cook-sidecar",
        description="Serve the knowledge-card wire protocol with small local models.")
    parser.add_argument("--config", metavar="PATH", help="sidecar config file (JSON)")
    parser.add_argument("--port", type=int, metavar="INT", help="override the listening port")
    parser.add_argument("--corpus", metavar="PATH", help="override the retrieval corpus")
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config) if args.config else SidecarConfig()
        updates = {}
        if args.port is not None:
            updates["port"] = args.port
        if args.corpus is not None:
            updates["corpus_path"] = args.corpus
        if updates:
            from dataclasses import replace

            config = replace(config, **updates)
        serve(config)
    except (SidecarConfigError, ModelLoadError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
