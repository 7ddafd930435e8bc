#!/usr/bin/env python3
"""Coding-efficiency report across context modes.

Encodes a synthetic corpus under each mode at the same codec settings
and reports mean payload bpp (entropy-coded bits only) and total bpp
(including packet headers). Richer contexts code tighter: the linear
chain is the cheapest, independent slices the most expensive.

Example:
    python3 scripts/run_efficiency_report.py --images 10 --L 10
"""

import argparse
import sys

import numpy as np

from resicomp.cli import parse_mode_spec
from resicomp.pipeline import PipelineConfig, send
from resicomp.synthetic import synthetic_corpus
from resicomp.token_codec import CodecConfig


def main(argv=None):
    parser = argparse.ArgumentParser(
        description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--modes", nargs="+",
                        default=["LC", "SLC:1", "MDC:2", "MDC:4", "ISC"])
    parser.add_argument("--images", type=int, default=10)
    parser.add_argument("--L", type=int, default=10)
    parser.add_argument("--channels", type=int, default=64)
    parser.add_argument("--quality", type=float, default=1.0)
    args = parser.parse_args(argv)

    codec = CodecConfig(channels=args.channels, quality=args.quality)
    corpus = synthetic_corpus(args.images)
    print(f"{'mode':<8} {'mean_bpp':>9} {'mean_bpp_total':>14}")
    for spec in args.modes:
        kind, params = parse_mode_spec(spec)
        payload, total = [], []
        for image in corpus:
            cfg = PipelineConfig(codec=codec, mode_kind=kind, l=args.L,
                                 mode_params=params)
            packets, _, _, _ = send(image, cfg)
            payload.append(sum(p.payload.bit_length for p in packets)
                           / image.size)
            total.append(sum(p.wire_bits for p in packets) / image.size)
        print(f"{spec:<8} {np.mean(payload):>9.3f} {np.mean(total):>14.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
