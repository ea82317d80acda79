"""CRC-concatenated polar code: 5G reliability construction, encoder and CA-SCL decoder.

The encoder applies ``x = u F^{(x)m}`` with ``F = [[1, 0], [1, 1]]`` and no
bit-reversal permutation. LLRs are ``log P(bit=0) / P(bit=1)``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from importlib import resources

import numba
import numpy as np


@dataclass(frozen=True)
class CrcSpec:
    width: int = 16
    poly: int = 0x1021  # x^16 + x^12 + x^5 + 1, leading term implicit
    init: int = 0x0000

    @functools.cached_property
    def _unit_table(self):
        return {}

    def remainder_matrix(self, length: int) -> tuple[np.ndarray, np.ndarray]:
        """Linear part and offset of the CRC as a map over GF(2).

        ``crc(p) = p @ G ^ c0 (mod 2)`` where row k of ``G`` is the CRC of
        the k-th unit vector under zero init and ``c0`` is the CRC of the
        all-zero payload under ``init``.
        """
        table = self._unit_table
        if length not in table:
            G = np.zeros((length, self.width), dtype=np.uint8)
            eye = np.eye(length, dtype=np.uint8)
            for k in range(length):
                G[k] = _crc_bitwise(eye[k], self.width, self.poly, 0)
            c0 = _crc_bitwise(np.zeros(length, np.uint8), self.width, self.poly, self.init)
            table[length] = (G, c0)
        return table[length]

    def compute(self, payload) -> np.ndarray:
        """CRC bits (MSB first) of one payload or a batch of payload rows."""
        p = np.asarray(payload, dtype=np.uint8)
        if self.width == 0:
            return np.zeros(p.shape[:-1] + (0,), dtype=np.uint8)
        G, c0 = self.remainder_matrix(p.shape[-1])
        return ((p.astype(np.int64) @ G) & 1).astype(np.uint8) ^ c0


def _crc_bitwise(bits: np.ndarray, width: int, poly: int, init: int) -> np.ndarray:
    """Shift-register long division, MSB-first, no reflection, no final XOR."""
    top = 1 << (width - 1)
    mask = (1 << width) - 1
    reg = init
    for b in bits:
        fb = ((reg & top) != 0) ^ bool(b)
        reg = (reg << 1) & mask
        if fb:
            reg ^= poly
    return np.array([(reg >> (width - 1 - k)) & 1 for k in range(width)], dtype=np.uint8)


def crc_attach(payload, crc: CrcSpec) -> np.ndarray:
    p = np.asarray(payload, dtype=np.uint8)
    return np.concatenate([p, crc.compute(p)])


def crc_check(bits, crc: CrcSpec) -> bool | np.ndarray:
    """True iff the trailing ``crc.width`` bits are the CRC of the rest.

    Accepts a single word or a 2-D batch (one word per row).
    """
    b = np.asarray(bits, dtype=np.uint8)
    if crc.width == 0:
        ok = np.ones(b.shape[:-1], dtype=bool)
    else:
        head, tail = b[..., : -crc.width], b[..., -crc.width:]
        ok = np.all(crc.compute(head) == tail, axis=-1)
    return bool(ok) if ok.ndim == 0 else ok


@functools.lru_cache(maxsize=1)
def reliability_sequence() -> np.ndarray:
    """3GPP TS 38.212 polar sequence for N_max = 1024, least reliable first."""
    text = resources.files("cellfree_ura").joinpath("data/nr_polar_sequence.txt").read_text()
    seq = np.array([int(line) for line in text.splitlines()
                    if line.strip() and not line.startswith("#")], dtype=np.int64)
    if seq.size != 1024 or not np.array_equal(np.sort(seq), np.arange(1024)):
        raise RuntimeError("corrupt reliability sequence data file")
    return seq


@dataclass(frozen=True, eq=False)
class PolarCodeSpec:
    n_c: int
    k: int
    info_set: np.ndarray  # sorted

    @functools.cached_property
    def frozen_mask(self) -> np.ndarray:
        mask = np.ones(self.n_c, dtype=np.uint8)
        mask[self.info_set] = 0
        return mask


def construct_info_set(n_c: int, k: int) -> PolarCodeSpec:
    if n_c < 1 or n_c & (n_c - 1) or n_c > 1024:
        raise ValueError("n_c must be a power of two not larger than 1024")
    if not 0 <= k <= n_c:
        raise ValueError(f"k={k} outside [0, n_c={n_c}]")
    seq = reliability_sequence()
    seq = seq[seq < n_c]
    info = np.sort(seq[n_c - k:]) if k else np.zeros(0, dtype=np.int64)
    info.setflags(write=False)
    return PolarCodeSpec(n_c=n_c, k=k, info_set=info)


def polar_transform(u: np.ndarray) -> np.ndarray:
    """``u F^{(x)m}`` over GF(2); works on the last axis of a batch."""
    x = np.array(u, dtype=np.uint8, copy=True)
    n = x.shape[-1]
    half = 1
    while half < n:
        x = x.reshape(x.shape[:-1] + (n // (2 * half), 2, half))
        x[..., 0, :] ^= x[..., 1, :]
        x = x.reshape(x.shape[:-3] + (n,))
        half *= 2
    return x


def polar_encode(info_bits, spec: PolarCodeSpec) -> np.ndarray:
    bits = np.asarray(info_bits, dtype=np.uint8)
    if bits.shape[-1] != spec.k:
        raise ValueError(f"expected {spec.k} info bits, got {bits.shape[-1]}")
    u = np.zeros(bits.shape[:-1] + (spec.n_c,), dtype=np.uint8)
    u[..., spec.info_set] = bits
    return polar_transform(u)


@numba.njit(cache=True, inline="always")
def _f(a, b):
    s = 1.0 if (a >= 0) == (b >= 0) else -1.0
    return s * min(abs(a), abs(b))


@numba.njit(cache=True)
def _scl_kernel(llr, frozen, L):
    """Min-sum list decoder. Returns (u_hat[L, n], metric[L], n_paths).

    Per path, layer d of the LLR tree (length n >> d) lives at offset
    2n - 2(n >> d) of a flat buffer; ``left`` holds the re-encoded bits of
    each completed left child at the same offsets.
    """
    n = llr.shape[0]
    m = 0
    while (1 << m) < n:
        m += 1
    size = 2 * n
    lam = np.zeros((L, size))
    left = np.zeros((L, size), dtype=np.uint8)
    u_hat = np.zeros((L, n), dtype=np.uint8)
    pm = np.zeros(L)
    n_paths = 1
    lam[0, :n] = llr
    cur = np.zeros(n, dtype=np.uint8)
    nxt = np.zeros(n, dtype=np.uint8)

    cand_pm = np.zeros(2 * L)
    parent_children = np.zeros(L, dtype=np.int64)
    keep = np.zeros((L, 2), dtype=np.uint8)

    for i in range(n):
        # LLR of leaf i for every live path
        if i == 0:
            start = 0
        else:
            x = i ^ (i - 1)
            h = 0
            while x > 1:
                x >>= 1
                h += 1
            start = m - 1 - h
        for p in range(n_paths):
            d = start
            if i > 0:
                s = n >> d
                half = s >> 1
                o_in = size - 2 * s
                o_out = size - 2 * half
                for t in range(half):
                    a = lam[p, o_in + t]
                    b = lam[p, o_in + half + t]
                    if left[p, o_out + t]:
                        lam[p, o_out + t] = b - a
                    else:
                        lam[p, o_out + t] = b + a
                d += 1
            while d < m:
                s = n >> d
                half = s >> 1
                o_in = size - 2 * s
                o_out = size - 2 * half
                for t in range(half):
                    lam[p, o_out + t] = _f(lam[p, o_in + t], lam[p, o_in + half + t])
                d += 1

        o_leaf = size - 2
        if frozen[i]:
            for p in range(n_paths):
                v = lam[p, o_leaf]
                if v < 0:
                    pm[p] += -v
                u_hat[p, i] = 0
        else:
            nc = 2 * n_paths
            for p in range(n_paths):
                v = lam[p, o_leaf]
                # child 2p takes bit 0, 2p+1 takes bit 1
                cand_pm[2 * p] = pm[p] + (-v if v < 0 else 0.0)
                cand_pm[2 * p + 1] = pm[p] + (v if v > 0 else 0.0)
            order = np.argsort(cand_pm[:nc], kind="mergesort")
            n_keep = min(L, nc)
            for p in range(n_paths):
                parent_children[p] = 0
                keep[p, 0] = 0
                keep[p, 1] = 0
            for r in range(n_keep):
                c = order[r]
                keep[c // 2, c % 2] = 1
                parent_children[c // 2] += 1
            # recycle slots of parents with no surviving child
            free = np.zeros(L, dtype=np.int64)
            nfree = 0
            for p in range(n_paths):
                if parent_children[p] == 0:
                    free[nfree] = p
                    nfree += 1
            for p in range(n_paths, L):
                free[nfree] = p
                nfree += 1
            fptr = 0
            for p in range(n_paths):
                if parent_children[p] == 2:
                    q = free[fptr]
                    fptr += 1
                    lam[q, :] = lam[p, :]
                    left[q, :] = left[p, :]
                    u_hat[q, :i] = u_hat[p, :i]
                    u_hat[p, i] = 0
                    pm[p] = cand_pm[2 * p]
                    u_hat[q, i] = 1
                    pm[q] = cand_pm[2 * p + 1]
                elif parent_children[p] == 1:
                    b = 0 if keep[p, 0] else 1
                    u_hat[p, i] = b
                    pm[p] = cand_pm[2 * p + b]
            # compact: surviving slots are all parents with children plus used free slots
            alive = np.zeros(L, dtype=np.uint8)
            for p in range(n_paths):
                if parent_children[p] > 0:
                    alive[p] = 1
            for k in range(fptr):
                alive[free[k]] = 1
            w = 0
            for p in range(L):
                if alive[p]:
                    if w != p:
                        lam[w, :] = lam[p, :]
                        left[w, :] = left[p, :]
                        u_hat[w, : i + 1] = u_hat[p, : i + 1]
                        pm[w] = pm[p]
                    w += 1
            n_paths = w

        # propagate decided bits up the tree
        for p in range(n_paths):
            cur[0] = u_hat[p, i]
            length = 1
            level = m
            while level > 0:
                side = (i >> (m - level)) & 1
                o = size - 2 * length
                if side == 0:
                    for t in range(length):
                        left[p, o + t] = cur[t]
                    break
                for t in range(length):
                    nxt[t] = left[p, o + t] ^ cur[t]
                    nxt[length + t] = cur[t]
                length *= 2
                for t in range(length):
                    cur[t] = nxt[t]
                level -= 1
    return u_hat, pm, n_paths


def scl_decode(llrs, spec: PolarCodeSpec, crc: CrcSpec, L_list: int) -> np.ndarray | None:
    """CRC-aided successive-cancellation list decoding.

    Returns the ``k - r`` payload bits of the best-metric path whose CRC
    checks, or ``None`` when no surviving path passes.
    """
    llr = np.ascontiguousarray(llrs, dtype=np.float64)
    if llr.shape != (spec.n_c,):
        raise ValueError(f"expected {spec.n_c} LLRs, got shape {llr.shape}")
    if L_list < 1:
        raise ValueError("L_list >= 1")
    u_hat, pm, n_paths = _scl_kernel(llr, spec.frozen_mask, int(L_list))
    order = np.argsort(pm[:n_paths], kind="stable")
    words = u_hat[order][:, spec.info_set]
    ok = crc_check(words, crc) if words.ndim == 2 else crc_check(words[None], crc)
    ok = np.atleast_1d(ok)
    for j in range(len(order)):
        if ok[j]:
            return words[j, : spec.k - crc.width].copy()
    return None
