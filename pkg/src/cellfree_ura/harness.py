"""Monte Carlo orchestration: trials, PUPE estimation and required-Eb/N0 search."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .config import SystemConfig, TrialResult, derive_seed, validate_config
from .cpu import run_decoding_loop
from .channel import apply_channel, generate_environment
from .receiver import ApState
from .tx import build_scheme, draw_messages, encode_user

log = logging.getLogger(__name__)


@dataclass
class PupeEstimate:
    p_md: float
    p_fa: float
    p_e: float
    trials: int
    std_err: float
    per_trial: list[float] = field(default_factory=list, repr=False)


@dataclass
class ExperimentSpec:
    base: SystemConfig
    sweep: str = "K_a"  # "K_a" | "power" | "ap_split"
    values: Sequence = ()
    trials: int = 200
    target_pupe: float = 0.05
    mode: str = "coop"

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials >= 1")
        if not 0 < self.target_pupe < 1:
            raise ValueError("target_pupe must lie in (0, 1)")


def ebn0(cfg: SystemConfig) -> float:
    """Transmit energy per bit over noise power, linear."""
    return (cfg.n_p * cfg.P_p + cfg.n_d * cfg.P_d) / (cfg.B * cfg.sigma2)


def ebn0_db(cfg: SystemConfig) -> float:
    return 10.0 * math.log10(ebn0(cfg))


def scale_power(cfg: SystemConfig, scale_db: float) -> SystemConfig:
    s = 10.0 ** (scale_db / 10.0)
    return cfg.replace(P_p=cfg.P_p * s, P_d=cfg.P_d * s)


def run_trial(cfg: SystemConfig, trial_index: int, genie: bool = False) -> TrialResult:
    """One frame: draw messages and channel, transmit, run the receiver.

    Deterministic in ``(cfg.master_seed, trial_index)``. The codebooks come
    from ``cfg.master_seed`` alone, so power scaling reuses the same random
    draws (common random numbers across a bisection).
    """
    cooperative = cfg.mode != "nocoop"
    scheme = build_scheme(cfg)
    eff = scheme.cfg
    tseed = derive_seed(cfg.master_seed, "trial", trial_index)
    messages = draw_messages(derive_seed(tseed, "messages", 0), eff.K_a, eff.B)
    frames = [encode_user(m, scheme) for m in messages]
    _, _, chan = generate_environment(eff, tseed)
    X = np.stack([f.signal for f in frames]) if frames else np.zeros((0, eff.n), complex)
    Y = apply_channel(derive_seed(tseed, "noise", 0), X, chan.g, eff.sigma2)
    states = [ApState(Y_resid=Y[m]) for m in range(eff.M)]
    genie_map = None
    if genie:
        genie_map = {}
        for f in frames:
            genie_map.setdefault(f.pilot_index, f.codeword_symbols)
    return run_decoding_loop(states, scheme, messages, genie=genie_map, cooperative=cooperative)


def _run_trial_args(args):
    cfg, idx, genie = args
    return run_trial(cfg, idx, genie)


def run_trials(cfg: SystemConfig, n_trials: int, workers: int = 1, genie: bool = False,
               progress: Callable[[int], None] | None = None) -> list[TrialResult]:
    jobs = [(cfg, i, genie) for i in range(n_trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_trial_args, jobs, chunksize=max(1, n_trials // (4 * workers))))
    out = []
    for job in jobs:
        out.append(_run_trial_args(job))
        if progress:
            progress(len(out))
    return out


def pupe_from_results(results: Sequence[TrialResult]) -> PupeEstimate:
    """Misdetections per active user plus false alarms per listed message (0/0 -> 0)."""
    md = np.array([r.n_md / r.K_a if r.K_a else 0.0 for r in results])
    fa = np.array([r.n_fa / len(r.decoded) if r.decoded else 0.0 for r in results])
    pe = md + fa
    t = len(results)
    std = float(pe.std(ddof=1) / math.sqrt(t)) if t > 1 else float("nan")
    return PupeEstimate(p_md=float(md.mean()), p_fa=float(fa.mean()), p_e=float(md.mean() + fa.mean()),
                        trials=t, std_err=std, per_trial=pe.tolist())


def estimate_pupe(cfg: SystemConfig, n_trials: int, workers: int = 1,
                  genie: bool = False) -> PupeEstimate:
    if n_trials < 1:
        raise ValueError("n_trials >= 1")
    problems = validate_config(cfg)
    if problems:
        log.warning("config violations: %s", "; ".join(problems))
    return pupe_from_results(run_trials(cfg, n_trials, workers, genie))


@dataclass
class EbN0Point:
    K_a: int
    feasible: bool
    ebn0_db: float
    P_p: float
    P_d: float
    sigma2: float
    p_e: float
    evaluations: int


def required_ebn0(cfg: SystemConfig, n_trials: int, target_pupe: float = 0.05,
                  bracket_db: tuple[float, float] = (-20.0, 20.0), tol_db: float = 0.25,
                  max_widen: int = 3, workers: int = 1,
                  pupe_fn: Callable[[SystemConfig], float] | None = None) -> EbN0Point:
    """Bisection on a common power scale until the PUPE crosses ``target_pupe``.

    The bracket is in dB relative to the powers of ``cfg``. It is widened
    (by its own width, up to ``max_widen`` times) when the upper end misses
    the target or the lower end already meets it. The reported point is the
    lowest evaluated power that met the target.
    """
    if pupe_fn is None:
        def pupe_fn(c):
            return estimate_pupe(c, n_trials, workers).p_e
    cache: dict[float, float] = {}

    def pe_at(s: float) -> float:
        if s not in cache:
            cache[s] = pupe_fn(scale_power(cfg, s))
            log.info("K_a=%d scale %+.2f dB -> Eb/N0 %.2f dB, p_e %.4f",
                     cfg.K_a, s, ebn0_db(scale_power(cfg, s)), cache[s])
        return cache[s]

    lo, hi = bracket_db
    width = hi - lo
    for attempt in range(max_widen + 1):
        if pe_at(hi) <= target_pupe:
            break
        if attempt == max_widen:
            c = scale_power(cfg, hi)
            return EbN0Point(cfg.K_a, False, float("nan"), c.P_p, c.P_d, c.sigma2, cache[hi], len(cache))
        lo, hi = hi, hi + width
    for _ in range(max_widen):
        if pe_at(lo) > target_pupe:
            break
        hi, lo = lo, lo - width
    while hi - lo > tol_db:
        mid = 0.5 * (lo + hi)
        if pe_at(mid) <= target_pupe:
            hi = mid
        else:
            lo = mid
    c = scale_power(cfg, hi)
    return EbN0Point(cfg.K_a, True, ebn0_db(c), c.P_p, c.P_d, c.sigma2, cache[hi], len(cache))
