"""Cell-free propagation: placement, shadowing, path loss, correlated fading, AWGN."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .config import SystemConfig, derive_seed

log = logging.getLogger(__name__)

SHADOW_VAR_DB = 16.0
DECORR_DISTANCE = 9.0


@dataclass
class Topology:
    ap_positions: np.ndarray  # (M, 2)
    user_positions: np.ndarray  # (K_a, 2)
    d: np.ndarray  # (K_a, M) user-AP distances
    d_user: np.ndarray  # (K_a, K_a)


@dataclass
class ChannelRealization:
    beta: np.ndarray  # (K_a, M), linear
    h: np.ndarray  # (K_a, M, M_r)
    g: np.ndarray  # (K_a, M, M_r), sqrt(beta) * h


def place_points(seed, count: int, D: float) -> np.ndarray:
    """Binomial point process: ``count`` i.i.d. uniform points on [0, D]^2."""
    if count < 0 or D <= 0:
        raise ValueError("count >= 0 and D > 0 required")
    rng = np.random.default_rng(seed)
    return rng.uniform(0.0, D, size=(count, 2))


def make_topology(ap_positions: np.ndarray, user_positions: np.ndarray) -> Topology:
    ap = np.asarray(ap_positions, dtype=float).reshape(-1, 2)
    ue = np.asarray(user_positions, dtype=float).reshape(-1, 2)
    return Topology(ap_positions=ap, user_positions=ue,
                    d=cdist(ue, ap), d_user=cdist(ue, ue))


def shadow_covariance(d_user: np.ndarray) -> np.ndarray:
    return SHADOW_VAR_DB * 2.0 ** (-np.asarray(d_user) / DECORR_DISTANCE)


def _covariance_factor(C: np.ndarray) -> np.ndarray:
    """Matrix ``F`` with ``F F^T = C``; eigenvalue clipping when Cholesky fails."""
    try:
        return np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(C)
        if w.min() < -1e-8 * max(w.max(), 1.0):
            log.debug("clipping negative shadow covariance eigenvalue %g", w.min())
        w = np.clip(w, 0.0, None)
        F = V * np.sqrt(w)
        if not np.all(np.isfinite(F)):
            raise RuntimeError(f"shadow covariance factorisation failed (eigenvalues {w.min()}..{w.max()})")
        return F


def shadow_fading(seed, topology: Topology) -> np.ndarray:
    """Shadowing in dB, (K_a, M); correlated across users, independent across APs."""
    K, M = topology.d.shape
    rng = np.random.default_rng(seed)
    if K == 0:
        return np.zeros((0, M))
    F = _covariance_factor(shadow_covariance(topology.d_user))
    return F @ rng.standard_normal((K, M))


def large_scale(topology: Topology | np.ndarray, F: np.ndarray) -> np.ndarray:
    """Urban-micro path loss at 2 GHz plus shadowing, returned in linear scale."""
    d = topology.d if isinstance(topology, Topology) else np.asarray(topology, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distances must be positive; apply a minimum distance first")
    beta_db = -30.5 - 36.7 * np.log10(d) + F
    return 10.0 ** (beta_db / 10.0)


def spatial_correlation(nominal_angle_deg: float, asd_deg: float, M_r: int) -> np.ndarray:
    """Gaussian local-scattering correlation for a half-wavelength ULA.

    ``R[l, k] = exp(j pi (l-k) sin(phi)) * exp(-asd^2/2 * (pi (l-k) cos(phi))^2)``
    with ``phi`` measured from broadside; asd in radians.
    """
    if M_r < 1:
        raise ValueError("M_r >= 1")
    phi = np.deg2rad(nominal_angle_deg)
    asd = np.deg2rad(asd_deg)
    delta = np.subtract.outer(np.arange(M_r), np.arange(M_r))
    R = np.exp(1j * np.pi * delta * np.sin(phi)) * np.exp(
        -(asd**2) / 2.0 * (np.pi * delta * np.cos(phi)) ** 2
    )
    return R


def correlation_sqrt(R: np.ndarray) -> np.ndarray:
    """Hermitian square root with negative eigenvalues clipped to zero."""
    w, V = np.linalg.eigh(R)
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.conj().T


def draw_small_scale(seed, R: np.ndarray, size: int | None = None) -> np.ndarray:
    """h = R^{1/2} w with w ~ CN(0, I); ``size`` draws are stacked along axis 0."""
    rng = np.random.default_rng(seed)
    M_r = R.shape[0]
    shape = (M_r,) if size is None else (size, M_r)
    w = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    return w @ correlation_sqrt(R).T


def nominal_angles_deg(topology: Topology) -> np.ndarray:
    """Azimuth of each user seen from each AP, from broadside of an x-axis ULA."""
    diff = topology.user_positions[:, None, :] - topology.ap_positions[None, :, :]
    return np.rad2deg(np.arctan2(diff[..., 0], diff[..., 1]))


def realize_channel(cfg: SystemConfig, topology: Topology, F: np.ndarray, seed) -> ChannelRealization:
    """Draw one quasi-static channel for every (user, AP) pair."""
    K, M = topology.d.shape
    d = np.maximum(topology.d, cfg.min_distance)
    beta = large_scale(d, F)
    rng = np.random.default_rng(seed)
    w = (rng.standard_normal((K, M, cfg.M_r)) + 1j * rng.standard_normal((K, M, cfg.M_r))) / np.sqrt(2.0)
    if cfg.M_r == 1 or cfg.correlation_model == "identity":
        h = w
    else:
        angles = nominal_angles_deg(topology)
        h = np.empty_like(w)
        for i in range(K):
            for m in range(M):
                S = correlation_sqrt(spatial_correlation(angles[i, m], cfg.asd_deg, cfg.M_r))
                h[i, m] = S @ w[i, m]
    g = np.sqrt(beta)[..., None] * h
    return ChannelRealization(beta=beta, h=h, g=g)


def apply_channel(seed, frames: np.ndarray, g: np.ndarray, sigma2: float) -> np.ndarray:
    """Received signals ``Y[m] = sum_i x_i g_{i,m} + Z_m``, shape (M, n, M_r).

    ``frames`` is (K_a, n); ``g`` is (K_a, M, M_r).
    """
    rng = np.random.default_rng(seed)
    frames = np.asarray(frames, dtype=np.complex128)
    K, M, M_r = g.shape
    n = frames.shape[1]
    if K:
        Y = np.ascontiguousarray(np.tensordot(frames, g, axes=(0, 0)).transpose(1, 0, 2))
    else:
        Y = np.zeros((M, n, M_r), dtype=complex)
    if sigma2 > 0:
        Z = rng.standard_normal((M, n, M_r)) + 1j * rng.standard_normal((M, n, M_r))
        Y = Y + np.sqrt(sigma2 / 2.0) * Z
    return Y


def generate_environment(cfg: SystemConfig, trial_seed: int):
    """Topology, shadowing and channel of one trial, each from its own seed stream."""
    ap = place_points(derive_seed(trial_seed, "ap-positions", 0), cfg.M, cfg.D)
    ue = place_points(derive_seed(trial_seed, "user-positions", 0), cfg.K_a, cfg.D)
    topo = make_topology(ap, ue)
    F = shadow_fading(derive_seed(trial_seed, "shadow", 0), topo)
    real = realize_channel(cfg, topo, F, derive_seed(trial_seed, "small-scale", 0))
    return topo, F, real
