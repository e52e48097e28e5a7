"""Command-line front end.

    python cli.py build --m 8 --N 72 --dv 2 --dc 3 --T 2 --seed 7 --out codes/c2.code
    python cli.py sim --code codes/c2.code --channel bec --grid 0.6,0.65 --seed 1
    python cli.py threshold --m 8 --dc 4 --T 2
    python cli.py de-sweep --m 1-10 --T 1-3 --dc 3 --csv sweep.csv

Results go to stdout as JSON lines, logs to stderr. Exit codes: 0 success,
2 bad parameters or code file, 3 code construction failure.
"""

import argparse
from contextlib import nullcontext
import json
import logging
import sys
from pathlib import Path
from typing import Iterable, List, Optional, TextIO

import numpy as np
import pandas as pd
from pydantic import BaseModel, ValidationError

import config
from errors import ConfigError, NBMRError
from models import (
    SIM_COLUMNS,
    SWEEP_COLUMNS,
    BuildRequest,
    DecodeReport,
    SimConfig,
)
from services.channel import ChannelKind, Observations, transmit_awgn, transmit_bec
from services.code import (
    COEFF_DOMAINS,
    DEFAULT_COEFF_DOMAIN,
    encode,
    extract_info,
    load_code,
    save_code,
)
from services.decoder import decode
from services.reference_bp import full_graph_decode
from services.simulation import build_from_request, de_sweep, run_simulation, summarize, threshold_report

logger = logging.getLogger("nbmr")


# ----- Argument helpers -----

def int_list(text: str) -> List[int]:
    """'1-4,7' -> [1, 2, 3, 4, 7]."""
    out: List[int] = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError(f"empty list: {text!r}")
    return out


def float_list(text: str) -> List[float]:
    values = [float(p) for p in text.split(",") if p.strip()]
    if not values:
        raise argparse.ArgumentTypeError(f"empty list: {text!r}")
    return values


def hex_list(text: str) -> List[int]:
    return [int(p, 16) for p in text.split(",") if p.strip()]


def _emit(records: Iterable[BaseModel], out: TextIO, csv_path: Optional[str], columns: List[str]) -> None:
    rows = []
    for record in records:
        out.write(record.json() + "\n")
        out.flush()
        rows.append(record.dict())
    if csv_path:
        pd.DataFrame(rows, columns=columns).to_csv(csv_path, index=False)
        logger.info("wrote %d row(s) to %s", len(rows), csv_path)


def _code_request(args: argparse.Namespace, seed: int) -> BuildRequest:
    missing = [flag for flag, value in (("--m", args.m), ("--N", args.N)) if value is None]
    if missing:
        raise ConfigError(f"missing {' and '.join(missing)} (or pass --code FILE)")
    return BuildRequest(
        m=args.m,
        n=args.N,
        dv=args.dv,
        dc=args.dc,
        T=args.T,
        seed=seed,
        coeff_domain=args.coeff_domain,
        puncture_rate=args.puncture_rate,
    )


# ----- Subcommands -----

def cmd_build(args: argparse.Namespace) -> int:
    code = build_from_request(_code_request(args, args.seed))
    path = save_code(code, args.out)
    summary = summarize(code, path)
    print(summary.json())
    logger.info("rate %s, K=%d, N=%d, T=%d -> %s", summary.rate, summary.k, summary.n, summary.T, path)
    return 0


def cmd_encode(args: argparse.Namespace) -> int:
    code = load_code(args.code)
    if args.info is not None:
        info = np.asarray(args.info, dtype=np.int64)
    else:
        info = np.random.default_rng(args.seed).integers(0, code.field.q, size=code.k)
    x = encode(code, info)
    print(json.dumps({
        "info": [f"{s:x}" for s in info.tolist()],
        "codeword": [f"{s:x}" for s in x.tolist()],
        "transmitted": [f"{s:x}" for s in x[code.transmitted_positions].tolist()],
    }))
    return 0


def _read_received(path: str) -> Observations:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
        kind = ChannelKind(data["channel"])
        if kind is ChannelKind.BEC:
            return Observations(kind, np.asarray(data["values"], dtype=np.int8))
        return Observations(kind, np.asarray(data["values"], dtype=np.float64), float(data["sigma2"]))
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: malformed received-values file ({exc})") from exc


def cmd_decode(args: argparse.Namespace) -> int:
    code = load_code(args.code)
    info = None
    if args.received:
        obs = _read_received(args.received)
    else:
        if args.point is None:
            raise ConfigError("decode needs --received FILE or --point with --channel")
        rng = np.random.default_rng(args.seed)
        info = rng.integers(0, code.field.q, size=code.k)
        bits = code.field.to_bits(encode(code, info)[code.transmitted_positions])
        if args.channel == ChannelKind.BEC.value:
            obs = transmit_bec(bits, args.point, rng)
        else:
            obs = transmit_awgn(bits, args.point, float(code.rate), rng)

    run = full_graph_decode if args.full_graph else decode
    result = run(code, obs, max_iter=args.max_iter)
    report = DecodeReport(
        success=result.success,
        iterations=result.iterations,
        syndrome_trace=result.syndrome_trace,
        contradictions=result.contradictions,
        full_graph=args.full_graph,
        estimate=[f"{s:x}" for s in result.estimate.tolist()],
    )
    if info is not None:
        info_hat = extract_info(code, result.estimate)
        report.symbol_errors = int(np.count_nonzero(info_hat != info))
        report.bit_errors = int(code.field.to_bits(info_hat ^ info).sum())
    print(report.json())
    return 0


def cmd_sim(args: argparse.Namespace) -> int:
    code_text = Path(args.code).read_text(encoding="utf-8") if args.code else None
    cfg = SimConfig(
        channel=args.channel,
        grid=args.grid,
        master_seed=args.seed,
        code=None if code_text is not None else _code_request(args, args.code_seed),
        code_text=code_text,
        max_iter=args.max_iter,
        min_trials=args.min_trials,
        max_frame_errors=args.max_frame_errors,
        max_trials=args.max_trials,
        batch_size=args.batch_size,
        workers=args.workers,
        all_zero=args.all_zero,
        timing=args.timing,
    )
    with open(args.out, "w", encoding="utf-8") if args.out else nullcontext(sys.stdout) as out:
        _emit(run_simulation(cfg), out, args.csv, SIM_COLUMNS)
    return 0


def cmd_threshold(args: argparse.Namespace) -> int:
    report = threshold_report(args.m, args.dc, args.T, args.tol, args.dv, args.puncture)
    print(report.json())
    logger.info(
        "eps* = %.6f, Shannon limit %.6f, normalized gap %.4f",
        report.threshold, report.shannon_limit, report.normalized_gap,
    )
    return 0


def cmd_de_sweep(args: argparse.Namespace) -> int:
    points = de_sweep(args.m, args.T, args.dc, args.tol, args.dv, args.puncture, args.workers)
    _emit(points, sys.stdout, args.csv, SWEEP_COLUMNS)
    return 0


# ----- Parser -----

def _add_code_params(p: argparse.ArgumentParser, required: bool) -> None:
    p.add_argument("--m", type=int, required=required, help="field degree, q = 2^m")
    p.add_argument("--N", type=int, required=required, help="mother code length in symbols")
    p.add_argument("--dv", type=int, default=2)
    p.add_argument("--dc", type=int, default=3)
    p.add_argument("--T", type=int, default=1, help="transmitted copies per mother symbol")
    p.add_argument("--coeff-domain", choices=COEFF_DOMAINS, default=DEFAULT_COEFF_DOMAIN)
    p.add_argument("--puncture-rate", type=float, default=None, help="target rate of the punctured mother code")


def _add_de_params(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dc", type=int, default=3)
    p.add_argument("--dv", type=int, default=2)
    p.add_argument("--tol", type=float, default=config.BISECT_TOL, help="bisection tolerance")
    p.add_argument("--puncture", type=float, default=0.0, help="fraction of punctured mother symbols")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nbmr", description="Non-binary LDPC codes with multiplicative repetition")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="construct a code and write its code file")
    _add_code_params(p, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", "-o", required=True, help="code file to write")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("encode", help="encode one information word")
    p.add_argument("--code", required=True)
    p.add_argument("--info", type=hex_list, default=None, help="comma-separated hex symbols")
    p.add_argument("--seed", type=int, default=0, help="seed for a random information word")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode one frame")
    p.add_argument("--code", required=True)
    p.add_argument("--received", help="JSON file with channel, values and (awgn) sigma2")
    p.add_argument("--channel", choices=[k.value for k in ChannelKind], default=ChannelKind.BEC.value)
    p.add_argument("--point", type=float, help="erasure probability or Eb/N0 in dB")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iter", type=int, default=config.MAX_ITER)
    p.add_argument("--full-graph", action="store_true", help="run BP on the complete Tanner graph instead")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("sim", help="Monte Carlo frame error rates over a parameter grid")
    p.add_argument("--code", help="code file (otherwise build from --m/--N/...)")
    _add_code_params(p, required=False)
    p.add_argument("--code-seed", type=int, default=0)
    p.add_argument("--channel", choices=[k.value for k in ChannelKind], required=True)
    p.add_argument("--grid", type=float_list, required=True, help="comma-separated eps or Eb/N0 (dB) values")
    p.add_argument("--seed", type=int, required=True, help="master seed")
    p.add_argument("--max-iter", type=int, default=config.MAX_ITER)
    p.add_argument("--min-trials", type=int, default=config.MIN_TRIALS)
    p.add_argument("--max-frame-errors", type=int, default=config.MAX_FRAME_ERRORS)
    p.add_argument("--max-trials", type=int, default=config.MAX_TRIALS)
    p.add_argument("--batch-size", type=int, default=config.BATCH_SIZE)
    p.add_argument("--workers", type=int, default=config.WORKERS)
    p.add_argument("--all-zero", action="store_true", help="send the all-zero word (bec only)")
    p.add_argument("--timing", action="store_true", help="include wall time in the records")
    p.add_argument("--out", help="JSON-lines file (default stdout)")
    p.add_argument("--csv", help="also write a CSV table")
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("threshold", help="BEC density-evolution threshold")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--T", type=int, default=1)
    _add_de_params(p)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("de-sweep", help="thresholds over a grid of m and T")
    p.add_argument("--m", type=int_list, required=True, help="e.g. 1-10")
    p.add_argument("--T", type=int_list, default=[1])
    _add_de_params(p)
    p.add_argument("--workers", type=int, default=config.WORKERS)
    p.add_argument("--csv", help="also write a CSV table")
    p.set_defaults(func=cmd_de_sweep)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(
        level=config.LOG_LEVEL,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NBMRError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code
    except ValidationError as exc:
        logger.error("invalid parameters: %s", exc)
        return ConfigError.exit_code
    except OSError as exc:
        logger.error("I/O error: %s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
