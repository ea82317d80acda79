"""QPSK mapping and LLR extraction."""

from __future__ import annotations

import numpy as np


def qpsk_modulate(bits, P_d: float) -> np.ndarray:
    """Map bit pairs to sqrt(P_d/2) * ((1 - 2 b_even) + j (1 - 2 b_odd))."""
    b = np.asarray(bits)
    if b.shape[-1] % 2:
        raise ValueError("QPSK needs an even number of bits")
    s = 1.0 - 2.0 * b.astype(np.float64)
    return np.sqrt(P_d / 2.0) * (s[..., 0::2] + 1j * s[..., 1::2])


def qpsk_llr(symbol_estimates, noise_scale: float = 1.0) -> np.ndarray:
    """Per-bit LLRs (positive favours 0), interleaved as (real, imag) per symbol."""
    if noise_scale <= 0:
        raise ValueError("noise_scale must be positive")
    c = np.asarray(symbol_estimates, dtype=np.complex128)
    out = np.empty(c.shape[:-1] + (2 * c.shape[-1],))
    k = 2.0 * np.sqrt(2.0) / noise_scale
    out[..., 0::2] = k * c.real
    out[..., 1::2] = k * c.imag
    return out


def hard_decision(llrs) -> np.ndarray:
    return (np.asarray(llrs) < 0).astype(np.uint8)
