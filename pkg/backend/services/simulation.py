"""Seeded Monte Carlo frame-error-rate runs and density-evolution sweeps.

Reproducibility contract: trial i of grid point g draws every random number
(information word and channel noise) from
``default_rng(SeedSequence([master_seed, g, i]))``. Trials are grouped into
fixed batches and the stop rule is only evaluated between batches, consumed in
order, so the records do not depend on how many worker processes ran them.
"""

from __future__ import annotations

from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple
import itertools
import logging
import time

import numpy as np

from errors import ConfigError
from models import BuildRequest, BuildSummary, SimConfig, SimRecord, SweepPoint, ThresholdReport
from services import density
from services.channel import ChannelKind, transmit_awgn, transmit_bec
from services.code import RepCode, build_code, code_checksum, encode, extract_info, parse_code
from services.decoder import decode

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Single trials
# ---------------------------------------------------------------------------

@dataclass
class Tally:
    trials: int = 0
    frame_errors: int = 0
    symbol_errors: int = 0
    bit_errors: int = 0
    successes: int = 0
    success_iterations: int = 0

    def __add__(self, other: "Tally") -> "Tally":
        return Tally(
            self.trials + other.trials,
            self.frame_errors + other.frame_errors,
            self.symbol_errors + other.symbol_errors,
            self.bit_errors + other.bit_errors,
            self.successes + other.successes,
            self.success_iterations + other.success_iterations,
        )


def trial_rng(master_seed: int, grid_index: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master_seed, grid_index, trial]))


def run_trial(
    code: RepCode,
    channel: ChannelKind,
    point: float,
    rng: np.random.Generator,
    max_iter: int,
    all_zero: bool = False,
) -> Tally:
    """Encode, transmit, decode one frame and count what went wrong."""
    gf = code.field
    if all_zero:
        info = np.zeros(code.k, dtype=np.int64)
    else:
        info = rng.integers(0, gf.q, size=code.k, dtype=np.int64)
    x = encode(code, info)
    bits = gf.to_bits(x[code.transmitted_positions])
    if channel is ChannelKind.BEC:
        obs = transmit_bec(bits, point, rng)
    else:
        obs = transmit_awgn(bits, point, float(code.rate), rng)

    result = decode(code, obs, max_iter=max_iter)
    info_hat = extract_info(code, result.estimate)
    symbol_errors = int(np.count_nonzero(info_hat != info))
    bit_errors = int(gf.to_bits(info_hat ^ info).sum())
    # a valid but different codeword is still a frame error
    ok = result.success and np.array_equal(result.estimate, x[: code.n])
    return Tally(
        trials=1,
        frame_errors=int(not ok),
        symbol_errors=symbol_errors,
        bit_errors=bit_errors,
        successes=int(ok),
        success_iterations=result.iterations if ok else 0,
    )


def run_batch(
    code: RepCode,
    channel: ChannelKind,
    point: float,
    master_seed: int,
    grid_index: int,
    trials: Tuple[int, int],
    max_iter: int,
    all_zero: bool = False,
) -> Tally:
    total = Tally()
    for i in range(*trials):
        total = total + run_trial(
            code, channel, point, trial_rng(master_seed, grid_index, i), max_iter, all_zero
        )
    return total


# ---------------------------------------------------------------------------
# Grid runs
# ---------------------------------------------------------------------------

def resolve_code(cfg: SimConfig) -> RepCode:
    if cfg.code_text is not None:
        return parse_code(cfg.code_text)
    return build_from_request(cfg.code)


def build_from_request(req: BuildRequest) -> RepCode:
    return build_code(
        m=req.m,
        n=req.n,
        dv=req.dv,
        dc=req.dc,
        T=req.T,
        seed=req.seed,
        coeff_domain=req.coeff_domain,
        puncture_rate=req.puncture_rate,
    )


def summarize(code: RepCode, path: Optional[Path] = None) -> BuildSummary:
    mother = code.mother
    return BuildSummary(
        m=code.field.m,
        n=mother.n,
        n_checks=mother.n_checks,
        k=mother.k,
        dv=mother.dv,
        dc=mother.dc,
        T=code.T,
        punctured=len(code.puncture),
        rate=str(code.rate),
        rate_value=float(code.rate),
        info_bits=code.info_bits,
        transmitted_bits=code.transmitted_bits,
        seed=mother.seed,
        crc32=code_checksum(code),
        path=str(path) if path is not None else None,
    )


def _batches(cfg: SimConfig) -> Iterator[Tuple[int, int]]:
    for start in range(0, cfg.max_trials, cfg.batch_size):
        yield start, min(start + cfg.batch_size, cfg.max_trials)


def _done(tally: Tally, cfg: SimConfig) -> bool:
    if tally.trials >= cfg.max_trials:
        return True
    return tally.frame_errors >= cfg.max_frame_errors and tally.trials >= cfg.min_trials


def _simulate_point(
    code: RepCode, cfg: SimConfig, grid_index: int, point: float, pool: Optional[Executor]
) -> Tally:
    args = (code, cfg.channel, point, cfg.master_seed, grid_index)
    tally = Tally()
    batches = _batches(cfg)
    if pool is None:
        for span in batches:
            tally = tally + run_batch(*args, span, cfg.max_iter, cfg.all_zero)
            if _done(tally, cfg):
                break
        return tally

    # keep one window of batches in flight; results are folded in batch order
    while True:
        window = list(itertools.islice(batches, cfg.workers))
        if not window:
            return tally
        futures = [pool.submit(run_batch, *args, span, cfg.max_iter, cfg.all_zero) for span in window]
        for future in futures:
            tally = tally + future.result()
            if _done(tally, cfg):
                for rest in futures:
                    rest.cancel()
                return tally


def run_simulation(cfg: SimConfig, code: Optional[RepCode] = None) -> Iterator[SimRecord]:
    """One SimRecord per grid point, yielded as soon as the point finishes."""
    code = code if code is not None else resolve_code(cfg)
    crc = code_checksum(code)
    pool = ProcessPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
    try:
        for grid_index, point in enumerate(cfg.grid):
            started = time.perf_counter()
            tally = _simulate_point(code, cfg, grid_index, point, pool)
            record = SimRecord(
                channel=cfg.channel,
                point=point,
                trials=tally.trials,
                frame_errors=tally.frame_errors,
                fer=tally.frame_errors / tally.trials,
                symbol_errors=tally.symbol_errors,
                bit_errors=tally.bit_errors,
                mean_iterations=(
                    tally.success_iterations / tally.successes if tally.successes else None
                ),
                master_seed=cfg.master_seed,
                code_crc=crc,
                wall_time=round(time.perf_counter() - started, 3) if cfg.timing else None,
            )
            logger.info(
                "%s point %g: %d/%d frame errors (fer %.3e)",
                cfg.channel.value, point, tally.frame_errors, tally.trials, record.fer,
            )
            yield record
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)


# ---------------------------------------------------------------------------
# Density evolution
# ---------------------------------------------------------------------------

def threshold_report(
    m: int,
    dc: int,
    T: int,
    bisect_tol: float,
    dv: int = 2,
    puncture: float = 0.0,
) -> ThresholdReport:
    if dv >= dc:
        raise ConfigError(f"need dv < dc for a positive rate, got dv={dv} dc={dc}")
    eps_star = density.threshold(m, dc, T, bisect_tol, dv=dv, puncture=puncture)
    rate = density.design_rate(dc, T, dv, puncture)
    return ThresholdReport(
        m=m,
        dv=dv,
        dc=dc,
        T=T,
        puncture=puncture,
        rate=rate,
        threshold=eps_star,
        shannon_limit=density.shannon_limit(rate),
        normalized_gap=density.normalized_gap(eps_star, rate),
        bisect_tol=bisect_tol,
    )


def _sweep_task(task: Tuple[int, int, int, int, float, int, float]) -> SweepPoint:
    index, m, T, dc, tol, dv, puncture = task
    report = threshold_report(m, dc, T, tol, dv, puncture)
    return SweepPoint(index=index, **report.dict())


def de_sweep(
    ms: Sequence[int],
    Ts: Sequence[int],
    dc: int,
    bisect_tol: float,
    dv: int = 2,
    puncture: float = 0.0,
    workers: int = 1,
) -> Iterable[SweepPoint]:
    """Thresholds over the (m, T) grid, m-major, in grid order."""
    if not ms or not Ts:
        raise ConfigError("de-sweep needs at least one m and one T")
    tasks: List[Tuple[int, int, int, int, float, int, float]] = [
        (index, m, T, dc, bisect_tol, dv, puncture)
        for index, (m, T) in enumerate(itertools.product(ms, Ts))
    ]
    if workers <= 1:
        return map(_sweep_task, tasks)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_sweep_task, tasks))
