"""Scenario parameters, shared result types and the seeding policy."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

MODES = ("coop", "nocoop", "central")
CORRELATION_MODELS = ("gaussian_local_scattering", "identity")


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    return 10.0 * math.log10(watts) + 30.0


@dataclass(frozen=True)
class SystemConfig:
    """Every parameter of one simulated scenario.

    Powers and the noise variance are in watts. Field names follow the
    conventional symbols of the system model so the JSON config file can
    use them verbatim.
    """

    n: int = 3200
    B: int = 100
    B_p: int = 12
    n_p: int = 1152
    n_c: int = 1024
    r: int = 16
    K_a: int = 100
    K_tot: int = 10_000
    M: int = 100
    M_r: int = 1
    K_m: int = 7
    D: float = 550.0
    P_p: float = 0.01
    P_d: float = 0.01
    sigma2: float = dbm_to_watts(-84.0)
    L_list: int = 8
    n_dec: int = 10
    asd_deg: float = 10.0
    master_seed: int = 2024
    # knobs beyond the core scenario
    mode: str = "coop"
    complex_pilots: bool = False
    correlation_model: str = "gaussian_local_scattering"
    crc_poly: int = 0x1021
    crc_init: int = 0x0000
    min_distance: float = 1.0

    @property
    def N(self) -> int:
        return 1 << self.B_p

    @property
    def n_d(self) -> int:
        return self.n_c // 2

    @property
    def B_c(self) -> int:
        return self.B - self.B_p

    @property
    def n_slots(self) -> int:
        """Number of channel uses in the data part."""
        return self.n - self.n_p

    def replace(self, **changes: Any) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SystemConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path: str | Path) -> "SystemConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    def effective(self) -> "SystemConfig":
        """Config actually simulated; ``central`` pools all antennas on one AP."""
        if self.mode == "central":
            return self.replace(M=1, M_r=self.M * self.M_r, mode="coop")
        return self


@dataclass(frozen=True)
class Message:
    bits: tuple[int, ...]
    origin_user: int

    def __post_init__(self):
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("message bits must be 0/1")


@dataclass
class TrialResult:
    decoded: set[tuple[int, ...]]
    n_md: int
    n_fa: int
    iterations_used: int
    per_iteration_decoded: list[int] = field(default_factory=list)
    K_a: int = 0

    def same_as(self, other: "TrialResult") -> bool:
        return (
            self.decoded == other.decoded
            and self.n_md == other.n_md
            and self.n_fa == other.n_fa
            and self.iterations_used == other.iterations_used
            and self.per_iteration_decoded == other.per_iteration_decoded
        )


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _is_num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def validate_config(cfg: SystemConfig) -> list[str]:
    """Return a description of every violated constraint; empty means valid.

    Never raises: malformed values are reported as violations.
    """
    v: list[str] = []
    ints = ("n", "B", "B_p", "n_p", "n_c", "r", "K_a", "K_tot", "M", "M_r",
            "K_m", "L_list", "n_dec", "master_seed")
    for name in ints:
        if not _is_int(getattr(cfg, name)):
            v.append(f"{name} must be an integer")
    for name in ("D", "P_p", "P_d", "sigma2", "asd_deg", "min_distance"):
        val = getattr(cfg, name)
        if not _is_num(val) or not math.isfinite(val):
            v.append(f"{name} must be a finite number")
    if v:
        return v

    if cfg.n_c <= 0 or cfg.n_c % 2:
        v.append("n_c must be positive and even (n_d = n_c / 2)")
    elif cfg.n_c & (cfg.n_c - 1):
        v.append("n_c must be a power of two")
    elif cfg.n_c > 1024:
        v.append("n_c must not exceed 1024 (reliability sequence length)")
    if cfg.n_p < 1:
        v.append("n_p >= 1")
    if cfg.n_p + cfg.n_c // 2 > cfg.n:
        v.append("n_p + n_d <= n")
    if not 0 <= cfg.B_p <= 30:
        v.append("0 <= B_p <= 30")
    if cfg.B - cfg.B_p <= 0:
        v.append("B_c > 0 (B_c = B - B_p)")
    if cfg.r < 0:
        v.append("r >= 0")
    if cfg.B - cfg.B_p + cfg.r > cfg.n_c:
        v.append("B_c + r <= n_c")
    if cfg.r > 32:
        v.append("r <= 32")
    if 0 <= cfg.B_p <= 30 and cfg.K_a > (1 << cfg.B_p):
        v.append("N = 2^B_p >= K_a recommended (pilot collisions)")
    if cfg.K_a < 0:
        v.append("K_a >= 0")
    if cfg.K_tot < cfg.K_a:
        v.append("K_tot >= K_a")
    for name in ("P_p", "P_d", "sigma2", "D", "min_distance"):
        if getattr(cfg, name) <= 0:
            v.append(f"{name} > 0")
    if cfg.asd_deg < 0:
        v.append("asd_deg >= 0")
    if cfg.M < 1:
        v.append("M >= 1")
    if cfg.M_r < 1:
        v.append("M_r >= 1")
    if 0 <= cfg.B_p <= 30 and not 1 <= cfg.K_m <= (1 << cfg.B_p):
        v.append("1 <= K_m <= N")
    if cfg.L_list < 1:
        v.append("L_list >= 1")
    if cfg.n_dec < 1:
        v.append("n_dec >= 1")
    if not 0 <= cfg.master_seed < 2**64:
        v.append("master_seed must fit in 64 bits")
    if cfg.mode not in MODES:
        v.append(f"mode must be one of {MODES}")
    if cfg.correlation_model not in CORRELATION_MODELS:
        v.append(f"correlation_model must be one of {CORRELATION_MODELS}")
    width = min(max(cfg.r, 0), 32)
    if width and not (_is_int(cfg.crc_poly) and 0 <= cfg.crc_poly < 1 << width):
        v.append("crc_poly must fit in r bits")
    if width and not (_is_int(cfg.crc_init) and 0 <= cfg.crc_init < 1 << width):
        v.append("crc_init must fit in r bits")
    return v


def derive_seed(master_seed: int, stream_label: str, index: int) -> int:
    """Mix (master seed, label, index) into an independent 64-bit seed."""
    h = hashlib.blake2b(digest_size=8, person=b"cfura-seed")
    h.update(int(master_seed).to_bytes(16, "little", signed=True))
    h.update(stream_label.encode())
    h.update(b"\x00")
    h.update(int(index).to_bytes(16, "little", signed=True))
    return int.from_bytes(h.digest(), "little")
