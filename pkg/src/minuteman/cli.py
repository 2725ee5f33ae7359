"""minuteman-replay: drive a scripted or recorded meeting through the pipeline."""

from __future__ import annotations

import argparse
import sys

from .errors import ManifestError
from .replay import run_replay


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="minuteman-replay",
        description="Feed a manifest-described meeting through the pipeline and "
                    "write transcript.txt, minutes.txt, and events.log.")
    parser.add_argument("--manifest", required=True, help="replay manifest (YAML)")
    parser.add_argument("--mode", choices=("fast", "realtime"), default="fast")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--server", default=None,
                        help="drive a running gateway over HTTP instead of in-process "
                             "(implies realtime pacing)")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed folded into synthesized audio")
    args = parser.parse_args(argv)

    try:
        result = run_replay(args.manifest, args.out, mode=args.mode,
                            server=args.server, seed=args.seed)
    except ManifestError as exc:
        print(f"manifest error: {exc}", file=sys.stderr)
        return 2
    print(f"session {result.session_id}")
    print(f"wrote {result.transcript_path}")
    print(f"wrote {result.minutes_path}")
    print(f"wrote {result.events_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
