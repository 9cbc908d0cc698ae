#!/usr/bin/env python3
"""Stand-in external codec for exercising command-template adapters.

encode modes:
  copy      write the input image bytes unchanged (lossless)
  zlib      zlib-compress the input bytes, level scaled off the CRF
  fail      exit nonzero with a diagnostic on stderr
  slow      sleep long enough to trip adapter timeouts
"""

import argparse
import sys
import time
import zlib

MAGIC = b"STUB"


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("action", choices=["encode", "decode"])
    parser.add_argument("input")
    parser.add_argument("output")
    parser.add_argument("--crf", type=int, default=0)
    parser.add_argument("--mode", default="copy")
    parser.add_argument("--record-dir-file", help="append the input's directory here")
    args = parser.parse_args()

    if args.record_dir_file:
        import os

        with open(args.record_dir_file, "a") as fh:
            fh.write(os.path.dirname(os.path.abspath(args.input)) + "\n")

    if args.action == "encode":
        if args.mode == "fail":
            print("stub codec: simulated encoder fault", file=sys.stderr)
            return 2
        if args.mode == "slow":
            time.sleep(60)
        data = open(args.input, "rb").read()
        if args.mode == "zlib":
            level = max(1, min(9, 9 - args.crf // 6))
            payload = MAGIC + b"Z" + zlib.compress(data, level)
        else:
            payload = MAGIC + b"C" + data
        open(args.output, "wb").write(payload)
        return 0

    blob = open(args.input, "rb").read()
    if not blob.startswith(MAGIC):
        print("stub codec: bad container", file=sys.stderr)
        return 3
    kind, payload = blob[4:5], blob[5:]
    data = zlib.decompress(payload) if kind == b"Z" else payload
    open(args.output, "wb").write(data)
    return 0


if __name__ == "__main__":
    sys.exit(main())
