"""CPU side: Level-2 symbol combining, list decoding and the SIC iteration loop."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .codebook import index_to_bits
from .config import Message, TrialResult
from .modem import qpsk_llr
from .polar import scl_decode
from .receiver import ApState, lmmse_symbols, omp_detect, sic_subtract
from .tx import Scheme, build_signal

log = logging.getLogger(__name__)


@dataclass
class DecodedSet:
    entries: list[tuple[int, np.ndarray, int]] = field(default_factory=list)
    output_list: set[tuple[int, ...]] = field(default_factory=set)
    pilots: set[int] = field(default_factory=set)

    def add(self, pilot: int, payload: np.ndarray, iteration: int, B_p: int) -> bool:
        """Record a decode; returns False if the pilot was already final."""
        if pilot in self.pilots:
            return False
        self.pilots.add(pilot)
        self.entries.append((pilot, payload, iteration))
        self.output_list.add(index_to_bits(pilot, B_p) + tuple(int(b) for b in payload))
        return True


def combine_symbols(per_ap: Sequence[tuple[Sequence[int], np.ndarray]]) -> dict[int, np.ndarray]:
    """Average each pilot's symbol estimates over the APs that detected it."""
    sums: dict[int, np.ndarray] = {}
    counts: dict[int, int] = {}
    for detected, C_hat in per_ap:
        if len(detected) != C_hat.shape[1]:
            raise ValueError("C_hat column count does not match detected list")
        for col, pilot in enumerate(detected):
            if pilot in sums:
                sums[pilot] = sums[pilot] + C_hat[:, col]
                counts[pilot] += 1
            else:
                sums[pilot] = C_hat[:, col].copy()
                counts[pilot] = 1
    return {p: sums[p] / counts[p] for p in sorted(sums)}


def decode_round(combined: Mapping[int, np.ndarray], scheme: Scheme,
                 already: DecodedSet, iteration: int = 0) -> list[tuple[int, np.ndarray]]:
    """Decode every combined pilot not yet final; CRC-passing ones join ``already``."""
    cfg = scheme.cfg
    new = []
    for pilot in sorted(combined):
        if pilot in already.pilots:
            continue
        llr = qpsk_llr(combined[pilot], 1.0)
        payload = scl_decode(llr, scheme.polar, scheme.crc, cfg.L_list)
        if payload is not None and already.add(pilot, payload, iteration, cfg.B_p):
            new.append((pilot, payload))
    return new


def score(output_list: set[tuple[int, ...]], messages: Sequence[Message]) -> tuple[int, int]:
    """Misdetections and false alarms of an output list against the sent messages."""
    sent = {m.bits for m in messages}
    n_md = sum(1 for m in messages if m.bits not in output_list)
    n_fa = len(output_list - sent)
    return n_md, n_fa


def _ap_stage(states: Sequence[ApState], scheme: Scheme, exclude: Callable[[ApState], set[int]]):
    """OMP + LMMSE at every AP on its current residual."""
    cfg = scheme.cfg
    n_p = cfg.n_p
    # one GEMM for every AP's pilot correlation
    Yp = np.concatenate([s.Y_resid[:n_p] for s in states], axis=1)
    corr = scheme.pilots.correlate(Yp)
    M_r = states[0].Y_resid.shape[1]
    for m, st in enumerate(states):
        det, G = omp_detect(st.Y_resid[:n_p], scheme.pilots, cfg.K_m, cfg.sigma2,
                            exclude=exclude(st), corr=corr[:, m * M_r:(m + 1) * M_r])
        st.detected = det
        st.G_hat = G
        pats = [scheme.patterns.active_indices[p] for p in det]
        if det:
            st.C_hat = lmmse_symbols(st.Y_resid[n_p:], G, cfg.sigma2, cfg.P_d, pats)
        else:
            st.C_hat = np.zeros((cfg.n_d, 0), dtype=np.complex128)


def run_decoding_loop(states: Sequence[ApState], scheme: Scheme,
                      messages: Sequence[Message],
                      genie: Mapping[int, np.ndarray] | None = None,
                      cooperative: bool = True) -> TrialResult:
    """Iterate AP estimation, CPU decoding and SIC until no progress or ``n_dec`` rounds.

    ``genie`` optionally replaces the combined symbol estimates with known
    symbols per pilot index (for oracle tests). With ``cooperative=False``
    every AP decodes only its own estimates and cancels only its own decodes.
    """
    cfg = scheme.cfg
    decoded = DecodedSet()
    per_ap = [DecodedSet() for _ in states]
    trace: list[int] = []
    signal_cache: dict[tuple[int, tuple[int, ...]], np.ndarray] = {}

    def rebuild(pilot, payload):
        key = (pilot, tuple(int(b) for b in payload))
        if key not in signal_cache:
            signal_cache[key] = build_signal(pilot, payload, scheme)[0]
        return signal_cache[key]

    iterations = 0
    for j in range(1, cfg.n_dec + 1):
        iterations = j
        if cooperative:
            _ap_stage(states, scheme, lambda st: decoded.pilots)
            combined = combine_symbols([(st.detected, st.C_hat) for st in states])
            if genie is not None:
                combined = dict(genie)
            new = decode_round(combined, scheme, decoded, j)
            trace.append(len(new))
            log.debug("iteration %d: %d new, %d total", j, len(new), len(decoded.output_list))
            if not new:
                break
            frames = [(p, rebuild(p, payload)) for p, payload in new]
            for st in states:
                st.Y_resid = sic_subtract(st.Y_resid, frames, st.G_hat, st.detected)
        else:
            _ap_stage(states, scheme, lambda st: st.own_decoded)
            n_new = 0
            before = len(decoded.output_list)
            for st, mine in zip(states, per_ap):
                local = {p: st.C_hat[:, c] for c, p in enumerate(st.detected)}
                new = decode_round(local, scheme, mine, j)
                st.own_decoded.update(p for p, _ in new)
                decoded.output_list.update(mine.output_list)
                n_new += len(new)
                frames = [(p, rebuild(p, payload)) for p, payload in new]
                st.Y_resid = sic_subtract(st.Y_resid, frames, st.G_hat, st.detected)
            trace.append(len(decoded.output_list) - before)
            if not n_new:
                break

    n_md, n_fa = score(decoded.output_list, messages)
    return TrialResult(decoded=set(decoded.output_list), n_md=n_md, n_fa=n_fa,
                       iterations_used=iterations, per_iteration_decoded=trace,
                       K_a=len(messages))
