"""Transmit chain: message bits -> pilot + ODMA-placed polar-coded QPSK frame."""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .codebook import (PatternMatrix, PilotCodebook, cached_pattern_matrix,
                       cached_pilot_codebook, pilot_index)
from .config import Message, SystemConfig, derive_seed
from .modem import qpsk_modulate
from .polar import CrcSpec, PolarCodeSpec, construct_info_set, crc_attach, polar_encode


@dataclass
class UserFrame:
    message: Message
    pilot_index: int
    pattern: np.ndarray  # data-slot indices, increasing
    codeword_symbols: np.ndarray  # (n_d,)
    signal: np.ndarray  # (n,)


@dataclass(frozen=True, eq=False)
class Scheme:
    """Everything shared by transmitters and receivers of one configuration."""

    cfg: SystemConfig
    pilots: PilotCodebook
    patterns: PatternMatrix
    polar: PolarCodeSpec
    crc: CrcSpec


@functools.lru_cache(maxsize=8)
def build_scheme(cfg: SystemConfig) -> Scheme:
    cfg = cfg.effective()
    pilots = cached_pilot_codebook(derive_seed(cfg.master_seed, "pilot", 0),
                                   cfg.n_p, cfg.N, cfg.P_p, cfg.complex_pilots)
    patterns = cached_pattern_matrix(derive_seed(cfg.master_seed, "pattern", 0),
                                     cfg.n_slots, cfg.N, cfg.n_d)
    polar = construct_info_set(cfg.n_c, cfg.B_c + cfg.r)
    crc = CrcSpec(width=cfg.r, poly=cfg.crc_poly, init=cfg.crc_init)
    return Scheme(cfg=cfg, pilots=pilots, patterns=patterns, polar=polar, crc=crc)


def build_signal(pilot_idx: int, payload, scheme: Scheme, P_d: float | None = None):
    """Length-n frame for a pilot index and B_c payload bits; also returns the symbols."""
    cfg = scheme.cfg
    P_d = cfg.P_d if P_d is None else P_d
    codeword = polar_encode(crc_attach(payload, scheme.crc), scheme.polar)
    symbols = qpsk_modulate(codeword, P_d)
    x = np.zeros(cfg.n, dtype=np.complex128)
    x[: cfg.n_p] = scheme.pilots.column(pilot_idx)
    x[cfg.n_p + scheme.patterns.active_indices[pilot_idx]] = symbols
    return x, symbols


def encode_user(message: Message, scheme: Scheme, P_d: float | None = None) -> UserFrame:
    cfg = scheme.cfg
    if len(message.bits) != cfg.B:
        raise ValueError(f"message must have {cfg.B} bits, got {len(message.bits)}")
    idx = pilot_index(message.bits, cfg.B_p)
    payload = np.asarray(message.bits[cfg.B_p:], dtype=np.uint8)
    x, symbols = build_signal(idx, payload, scheme, P_d)
    return UserFrame(message=message, pilot_index=idx,
                     pattern=scheme.patterns.active_indices[idx],
                     codeword_symbols=symbols, signal=x)


def draw_messages(seed, K_a: int, B: int) -> list[Message]:
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=(K_a, B))
    return [Message(bits=tuple(int(b) for b in row), origin_user=i) for i, row in enumerate(bits)]
