"""Shared pilot codebook and on-off transmission pattern matrix."""

from __future__ import annotations

import functools
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"CFURACB\x00"
FORMAT_VERSION = 1
# magic, version, n_p, N, n_d, n_slots, is_complex
_HEADER = struct.Struct("<8sIIIIII")


class _LazyGram:
    """``A^H A`` of a base matrix, computed on first use and shared by rescaled copies."""

    def __init__(self, A: np.ndarray):
        self._A = A
        self._gram = None

    @property
    def value(self) -> np.ndarray:
        if self._gram is None:
            A = self._A
            self._gram = A.conj().T @ A if np.iscomplexobj(A) else A.T @ A
            self._gram.setflags(write=False)
        return self._gram


@dataclass(frozen=True, eq=False)
class PilotCodebook:
    """Columns of ``A`` are the candidate pilots, each of norm sqrt(n_p * P_p)."""

    A: np.ndarray
    P_p: float
    _base_gram: _LazyGram | None = field(default=None, repr=False)
    _gram_scale: float = field(default=1.0, repr=False)

    def __post_init__(self):
        if self._base_gram is None:
            object.__setattr__(self, "_base_gram", _LazyGram(self.A))

    @property
    def n_p(self) -> int:
        return self.A.shape[0]

    @property
    def N(self) -> int:
        return self.A.shape[1]

    def gram_columns(self, cols) -> np.ndarray:
        """Columns ``cols`` of ``A^H A``, shape (N, len(cols))."""
        rows = self._base_gram.value[cols]  # Hermitian: gather contiguous rows
        return self._gram_scale * (rows.conj().T if np.iscomplexobj(rows) else rows.T)

    def gram_block(self, cols) -> np.ndarray:
        return self._gram_scale * self._base_gram.value[np.ix_(cols, cols)]

    @property
    def gram(self) -> np.ndarray:
        return self._gram_scale * self._base_gram.value

    def scaled(self, P_p: float) -> "PilotCodebook":
        """Same pilot directions at another symbol power, sharing the Gram cache."""
        if self.P_p > 0:
            factor = P_p / self.P_p
            A = self.A * np.sqrt(factor)
            gscale = self._gram_scale * factor
        else:
            raise ValueError("cannot rescale a zero-power codebook")
        A.setflags(write=False)
        return PilotCodebook(A=A, P_p=P_p, _base_gram=self._base_gram, _gram_scale=gscale)

    def column(self, idx: int) -> np.ndarray:
        return self.A[:, idx]

    def correlate(self, Y: np.ndarray) -> np.ndarray:
        """``A^H Y`` with a real GEMM when the pilots are real."""
        A = self.A
        if np.iscomplexobj(A):
            return A.conj().T @ Y
        if not np.iscomplexobj(Y):
            return A.T @ Y
        k = Y.shape[1]
        both = A.T @ np.concatenate([Y.real, Y.imag], axis=1)
        return both[:, :k] + 1j * both[:, k:]


@dataclass(frozen=True, eq=False)
class PatternMatrix:
    """Binary (n_slots x N) matrix; column c marks the data slots used by pilot c."""

    active_indices: np.ndarray  # (N, n_d), each row strictly increasing
    n_slots: int

    @property
    def N(self) -> int:
        return self.active_indices.shape[0]

    @property
    def n_d(self) -> int:
        return self.active_indices.shape[1]

    @property
    def P(self) -> np.ndarray:
        P = np.zeros((self.n_slots, self.N), dtype=np.uint8)
        P[self.active_indices, np.arange(self.N)[:, None]] = 1
        return P


def generate_pilot_codebook(seed: int, n_p: int, N: int, P_p: float,
                            complex_pilots: bool = False) -> PilotCodebook:
    """Gaussian pilots, columns rescaled to norm sqrt(n_p * P_p).

    Entries are real standard normal unless ``complex_pilots`` is set, in
    which case they are CN(0, 1).
    """
    if n_p < 1 or N < 1:
        raise ValueError("n_p and N must be positive")
    rng = np.random.default_rng(seed)
    if complex_pilots:
        A = (rng.standard_normal((n_p, N)) + 1j * rng.standard_normal((n_p, N))) / np.sqrt(2)
    else:
        A = rng.standard_normal((n_p, N))
    A = A * (np.sqrt(n_p * P_p) / np.linalg.norm(A, axis=0))
    A.setflags(write=False)
    return PilotCodebook(A=A, P_p=P_p)


@functools.lru_cache(maxsize=4)
def _unit_pilot_codebook(seed: int, n_p: int, N: int, complex_pilots: bool) -> PilotCodebook:
    return generate_pilot_codebook(seed, n_p, N, 1.0, complex_pilots)


def cached_pilot_codebook(seed: int, n_p: int, N: int, P_p: float,
                          complex_pilots: bool = False) -> PilotCodebook:
    """Like :func:`generate_pilot_codebook`, reusing the Gram matrix across powers."""
    return _unit_pilot_codebook(seed, n_p, N, complex_pilots).scaled(P_p)


def generate_pattern_matrix(seed: int, n_data_slots: int, N: int, n_d: int) -> PatternMatrix:
    """Independent uniformly random n_d-subsets of the data slots, one per column."""
    if not 0 <= n_d <= n_data_slots:
        raise ValueError("need 0 <= n_d <= n_data_slots")
    rng = np.random.default_rng(seed)
    # partial Fisher-Yates, vectorised across columns
    perm = np.tile(np.arange(n_data_slots), (N, 1))
    rows = np.arange(N)
    for t in range(n_d):
        j = rng.integers(t, n_data_slots, size=N)
        tmp = perm[rows, t].copy()
        perm[rows, t] = perm[rows, j]
        perm[rows, j] = tmp
    active = np.sort(perm[:, :n_d], axis=1)
    active.setflags(write=False)
    return PatternMatrix(active_indices=active, n_slots=n_data_slots)


@functools.lru_cache(maxsize=4)
def cached_pattern_matrix(seed: int, n_data_slots: int, N: int, n_d: int) -> PatternMatrix:
    return generate_pattern_matrix(seed, n_data_slots, N, n_d)


def bits_to_index(bits) -> int:
    """Big-endian: the first bit is the most significant."""
    idx = 0
    for b in bits:
        if b not in (0, 1):
            raise ValueError("bits must be 0/1")
        idx = (idx << 1) | int(b)
    return idx


def index_to_bits(idx: int, width: int) -> tuple[int, ...]:
    if not 0 <= idx < (1 << width):
        raise ValueError(f"index {idx} does not fit in {width} bits")
    return tuple((idx >> (width - 1 - k)) & 1 for k in range(width))


def pilot_index(bits, B_p: int) -> int:
    """Index selected by the leading ``B_p`` bits of a message."""
    head = list(bits[:B_p])
    if len(head) != B_p:
        raise ValueError(f"expected {B_p} pilot bits, got {len(head)}")
    return bits_to_index(head)


def save_codebooks(path: str | Path, pilots: PilotCodebook, patterns: PatternMatrix) -> None:
    """Binary dump: header, A row-major (real then imaginary part), packed P."""
    if pilots.N != patterns.N:
        raise ValueError("pilot and pattern codebooks disagree on N")
    is_complex = int(np.iscomplexobj(pilots.A))
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, pilots.n_p, pilots.N,
                          patterns.n_d, patterns.n_slots, is_complex)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(struct.pack("<d", pilots.P_p))
        fh.write(np.ascontiguousarray(pilots.A.real, dtype="<f8").tobytes())
        if is_complex:
            fh.write(np.ascontiguousarray(pilots.A.imag, dtype="<f8").tobytes())
        fh.write(np.packbits(patterns.P, axis=None).tobytes())


def load_codebooks(path: str | Path) -> tuple[PilotCodebook, PatternMatrix]:
    data = Path(path).read_bytes()
    magic, version, n_p, N, n_d, n_slots, is_complex = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise ValueError(f"{path}: not a codebook dump")
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    off = _HEADER.size
    (P_p,) = struct.unpack_from("<d", data, off)
    off += 8
    size = n_p * N
    A = np.frombuffer(data, dtype="<f8", count=size, offset=off).reshape(n_p, N).astype(float)
    off += 8 * size
    if is_complex:
        A = A + 1j * np.frombuffer(data, dtype="<f8", count=size, offset=off).reshape(n_p, N)
        off += 8 * size
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8, offset=off))[: n_slots * N]
    P = bits.reshape(n_slots, N)
    active = np.stack([np.flatnonzero(P[:, c]) for c in range(N)]) if N else np.zeros((0, n_d), int)
    if active.shape[1] != n_d:
        raise ValueError(f"{path}: pattern columns do not have n_d={n_d} ones")
    A.setflags(write=False)
    active.setflags(write=False)
    return PilotCodebook(A=A, P_p=P_p), PatternMatrix(active_indices=active, n_slots=n_slots)
