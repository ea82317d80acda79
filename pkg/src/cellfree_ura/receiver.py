"""Per-AP processing: OMP pilot/channel estimation, LMMSE symbol estimation, SIC."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .codebook import PilotCodebook


@dataclass
class ApState:
    Y_resid: np.ndarray  # (n, M_r)
    detected: list[int] = field(default_factory=list)
    G_hat: np.ndarray | None = None  # (len(detected), M_r)
    C_hat: np.ndarray | None = None  # (n_d, len(detected))
    # pilots decoded from this AP's own estimates; used only without cooperation
    own_decoded: set[int] = field(default_factory=set)


def _regularised_solve(gram_s: np.ndarray, rhs: np.ndarray, reg: float) -> np.ndarray:
    G = gram_s + reg * np.eye(gram_s.shape[0])
    return scipy.linalg.solve(G, rhs, assume_a="her")


def omp_detect(Y_p: np.ndarray, pilots: PilotCodebook, K_m: int, reg: float,
               exclude: Iterable[int] = (), corr: np.ndarray | None = None):
    """Greedy joint pilot detection and channel estimation.

    Each step picks the undetected pilot whose correlation row with the
    residual has the largest norm (lowest index on ties), then recomputes
    the residual by removing the regularised least-squares fit of all
    pilots picked so far. Returns ``(detected, G_hat)`` with ``G_hat`` the
    final regularised fit, one row per detected pilot.

    ``corr`` may carry a precomputed ``A^H Y_p``.
    """
    if reg <= 0:
        raise ValueError("reg must be positive")
    Y_p = np.asarray(Y_p)
    if Y_p.ndim == 1:
        Y_p = Y_p[:, None]
    C0 = pilots.correlate(Y_p) if corr is None else corr
    blocked = np.zeros(pilots.N, dtype=bool)
    blocked[list(exclude)] = True

    R = C0
    detected: list[int] = []
    coef = np.zeros((0, Y_p.shape[1]), dtype=np.result_type(C0, 1j))
    for _ in range(K_m):
        metric = np.einsum("ij,ij->i", R.real, R.real) + np.einsum("ij,ij->i", R.imag, R.imag)
        metric[blocked] = -np.inf
        s = int(np.argmax(metric))
        if blocked[s]:
            break
        detected.append(s)
        blocked[s] = True
        coef = _regularised_solve(pilots.gram_block(detected), C0[detected], reg)
        R = C0 - pilots.gram_columns(detected) @ coef
    return detected, coef


def lmmse_symbols(Y_d: np.ndarray, G_hat: np.ndarray, sigma2: float, P_d: float,
                  patterns: Sequence[np.ndarray]) -> np.ndarray:
    """LMMSE data-symbol estimates for the detected users of one AP.

    ``W = (G^H G + sigma2/P_d I)^{-1} G^H`` maps each received row to the
    users' symbols; user u keeps the entries at its own pattern slots.
    Returns an (n_d, K) array.
    """
    G = np.atleast_2d(np.asarray(G_hat))
    K, M_r = G.shape
    if K == 0:
        n_d = len(patterns[0]) if len(patterns) else 0
        return np.zeros((n_d, 0), dtype=np.complex128)
    if P_d > 0:
        gram = G.conj().T @ G + (sigma2 / P_d) * np.eye(M_r)
        W = scipy.linalg.solve(gram, G.conj().T, assume_a="her")
    else:
        W = np.zeros((M_r, K), dtype=np.complex128)
    Cp = np.asarray(Y_d) @ W
    cols = np.arange(K)[None, :]
    rows = np.stack([np.asarray(p) for p in patterns], axis=1)
    return Cp[rows, cols]


def sic_subtract(Y_resid: np.ndarray, decoded_frames, G_hat: np.ndarray,
                 detected: Sequence[int]) -> np.ndarray:
    """Remove re-encoded decoded users that this AP detected, over the full frame.

    ``decoded_frames`` is an iterable of ``(pilot_index, signal)`` pairs.
    """
    row_of = {p: i for i, p in enumerate(detected)}
    Y = np.array(Y_resid, dtype=np.complex128, copy=True)
    for pilot, x in decoded_frames:
        i = row_of.get(pilot)
        if i is None:
            continue
        Y -= np.outer(x, G_hat[i])
    return Y
