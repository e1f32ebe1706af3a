"""``roast`` command-line interface."""
from __future__ import annotations

import argparse
import json
import secrets
import sys
from pathlib import Path

import numpy as np

from .codes.key import StegoKey
from .codes.stc import EmbeddingError
from .jpeg_io import JpegError, build_qtable, read_jpeg, write_jpeg
from .schemes import SCHEMES, CapacityError, SchemeParams, embed, extract, message_for_payload
from .transform import AblationFlags, recompress

EXIT_USAGE = 2
EXIT_IO = 3
EXIT_FORMAT = 4
EXIT_CAPACITY = 5
EXIT_EMBED = 6


def _flags(args):
    return AblationFlags(not args.no_trunc, not args.no_round)


def cmd_embed(args):
    cover = read_jpeg(args.cover)
    params = SchemeParams(args.scheme, payload=args.payload or 0.0, t1=args.t1, t2=args.t2,
                          lam=args.lam, mu=args.mu, min_rate=args.min_rate)
    seed = args.seed if args.seed is not None else secrets.randbits(63)
    if args.message is not None:
        msg = Path(args.message).read_bytes()
    else:
        msg = message_for_payload(cover, params.payload, np.random.default_rng(seed))
        if args.msg_out:
            Path(args.msg_out).write_bytes(msg)
    result = embed(cover, msg, StegoKey(seed=seed, scheme=args.scheme, h=args.h), params)
    write_jpeg(result.stego, args.out)
    result.key.save(args.key)
    print(json.dumps({
        "message_bits": result.account.n_m,
        "nzac": result.account.n_nzac,
        "bpnzac": round(result.account.relative, 6),
        "preprocessing_changes": result.preprocessing_changes,
        "embedding_changes": result.embedding_changes,
        "codewords": result.key.n_codewords,
    }))


def cmd_extract(args):
    key = StegoKey.load(args.key)
    out = extract(read_jpeg(args.input), key, _flags(args))
    if args.out:
        Path(args.out).write_bytes(out.message)
    report = {"message_bytes": len(out.message), "rs_failures": out.rs_failures,
              "codewords": out.n_codewords}
    if args.ref_msg:
        ref = Path(args.ref_msg).read_bytes()
        report["bit_errors"] = out.bit_errors(ref)
        report["r_error"] = out.error_rate(ref)
        report["exact"] = out.message == ref
    if not args.out:
        report["message_hex"] = out.message.hex()
    print(json.dumps(report))


def _external_recompress(path, out, qf):
    from PIL import Image

    Image.open(path).convert("L").save(out, "JPEG", quality=qf)


def cmd_attack(args):
    if args.external:
        _external_recompress(args.input, args.out, args.qf)
        return
    write_jpeg(recompress(read_jpeg(args.input), args.qf, _flags(args)), args.out)


def cmd_sweep(args):
    from .harness import SweepConfig, cmd_sweep as sweep

    config = SweepConfig.from_json(args.config)
    if args.output:
        config = SweepConfig.from_dict({**json.loads(config.to_json()), "output": args.output})
    text = sweep(config)
    if config.output is None:
        sys.stdout.write(text)


def cmd_stats_overflow(args):
    from .harness import cmd_overflow_stats

    long_csv, summary = cmd_overflow_stats(args.corpus, args.qf, args.output, args.summary,
                                           args.limit)
    if args.output is None:
        sys.stdout.write(long_csv)
    if args.summary is None:
        sys.stderr.write(summary)


def cmd_mc_rounding(args):
    from .harness import cmd_rounding_mc

    sys.stdout.write(cmd_rounding_mc(args.q, args.trials, args.seed, args.output))


def cmd_ablate(args):
    from .harness import cmd_ablate as ablate

    sys.stdout.write(ablate(read_jpeg(args.image), args.qf, _flags(args), args.output))


def cmd_make_corpus(args):
    from .corpus import build_desk_corpus, convert_directory

    if args.source:
        paths = convert_directory(args.source, args.out, args.qf)
    else:
        paths = build_desk_corpus(args.out, args.n, args.size, args.qf, args.seed, args.raw)
    print(f"{len(paths)} covers in {args.out}")


def _qf(text):
    value = int(text)
    build_qtable(value)
    return value


def _ablation_args(p):
    p.add_argument("--no-trunc", action="store_true", help="skip spatial truncation")
    p.add_argument("--no-round", action="store_true", help="skip spatial rounding")


def build_parser():
    parser = argparse.ArgumentParser(prog="roast", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embed", help="hide a message in a grayscale JPEG")
    p.add_argument("--cover", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--key", required=True, help="key file to write")
    p.add_argument("--scheme", choices=SCHEMES, default="roast-st")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--message", help="file holding the message bytes")
    src.add_argument("--payload", type=float, help="random message of this many bpnzac")
    p.add_argument("--msg-out", help="where to save a generated random message")
    p.add_argument("--t1", type=int, default=8)
    p.add_argument("--t2", type=float, default=0.0)
    p.add_argument("--mu", type=float, default=0.5)
    p.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--h", type=int, default=10, help="STC constraint height")
    p.add_argument("--min-rate", type=float,
                   help="confine short messages to a domain prefix at this STC layer rate")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("extract", help="recover a message")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--key", required=True)
    p.add_argument("--out", help="write message bytes here")
    p.add_argument("--ref-msg", help="original message for bit-error accounting")
    _ablation_args(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("attack", help="recompress a JPEG")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--qf", type=_qf, required=True)
    p.add_argument("--external", action="store_true", help="use Pillow's encoder instead")
    _ablation_args(p)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("sweep", help="evaluate a corpus from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--output")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("stats-overflow", help="per-position overflow statistics")
    p.add_argument("--corpus", required=True, help="directory of PNG/PGM sources or JPEGs")
    p.add_argument("--qf", type=_qf, nargs="+", default=[65])
    p.add_argument("--output")
    p.add_argument("--summary")
    p.add_argument("--limit", type=int)
    p.set_defaults(func=cmd_stats_overflow)

    p = sub.add_parser("mc-rounding", help="Monte Carlo of rounding-error survival")
    p.add_argument("--q", type=int, nargs="+", default=[1, 2, 3])
    p.add_argument("--trials", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output")
    p.set_defaults(func=cmd_mc_rounding)

    p = sub.add_parser("ablate", help="per-position channel perturbation report")
    p.add_argument("--image", required=True)
    p.add_argument("--qf", type=_qf, default=85)
    p.add_argument("--output")
    _ablation_args(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("make-corpus", help="build QF-65 covers")
    p.add_argument("--out", required=True)
    p.add_argument("--source", help="directory of images to re-encode; default: bundled crops")
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--qf", type=_qf, default=65)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--raw", help="also save the uncompressed crops here as PNG")
    p.set_defaults(func=cmd_make_corpus)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except CapacityError as exc:
        print(f"roast: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except EmbeddingError as exc:
        print(f"roast: embedding failed: {exc}", file=sys.stderr)
        return EXIT_EMBED
    except JpegError as exc:
        print(f"roast: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except OSError as exc:
        print(f"roast: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"roast: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return 0


if __name__ == "__main__":
    sys.exit(main())
