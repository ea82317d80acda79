"""Acceptance criteria, one test each; every test prints a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline; they
are also repeated in the terminal summary.
"""

import csv
import io
import json
import math
import os
import time

import numpy as np
import pytest

from cellfree_ura import cli
from cellfree_ura.channel import apply_channel, make_topology, shadow_fading
from cellfree_ura.codebook import generate_pilot_codebook
from cellfree_ura.config import SystemConfig, dbm_to_watts
from cellfree_ura.harness import estimate_pupe, required_ebn0
from cellfree_ura.modem import qpsk_llr, qpsk_modulate
from cellfree_ura.polar import CrcSpec, construct_info_set, crc_attach, polar_encode, scl_decode
from cellfree_ura.receiver import lmmse_symbols, omp_detect, sic_subtract
from cellfree_ura.tx import build_scheme, draw_messages, encode_user

import oracles


def _crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def test_01_exhaustive_list_equals_ml(acceptance):
    spec = construct_info_set(8, 4)
    infos, cws = oracles.polar_codebook(8, spec.info_set)
    none = CrcSpec(width=0)
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    unique = mismatches = 0
    for _ in range(1000):
        cw = cws[rng.integers(16)]
        sigma = rng.uniform(0.5, 1.2)
        llr = 2.0 * (1.0 - 2.0 * cw + sigma * rng.standard_normal(8)) / sigma**2
        ml, is_unique = oracles.ml_decode(llr, infos, cws)
        got = scl_decode(llr, spec, none, 16)
        if is_unique:
            unique += 1
            mismatches += not np.array_equal(got, ml)
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 10.0
    acceptance(1, ok, f"SCL(L=16) vs ML on (8,4): {mismatches} mismatches in {unique} unique-ML "
                      f"instances, {elapsed:.2f} s")
    assert ok


def test_02_codec_round_trip(acceptance):
    spec = construct_info_set(1024, 104)
    crc = CrcSpec()
    rng = np.random.default_rng(102)
    t0 = time.perf_counter()
    payloads = rng.integers(0, 2, (10_000, 88)).astype(np.uint8)
    failures = 0
    for p in payloads:
        llr = qpsk_llr(qpsk_modulate(polar_encode(crc_attach(p, crc), spec), 0.01))
        got = scl_decode(llr, spec, crc, 8)
        failures += got is None or not np.array_equal(got, p)
    elapsed = time.perf_counter() - t0
    ok = failures == 0 and elapsed < 120.0
    acceptance(2, ok, f"10000 noiseless round trips at L=8: {failures} failures, {elapsed:.1f} s")
    assert ok


def test_03_lmmse_oracle(acceptance):
    rng = np.random.default_rng(103)
    worst = 0.0
    for _ in range(100):
        K, M_r = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        n_slots, n_d = 64, 16
        G = _crandn(rng, K, M_r)
        Y = _crandn(rng, n_slots, M_r)
        pats = [np.sort(rng.choice(n_slots, n_d, replace=False)) for _ in range(K)]
        sigma2, P_d = 10 ** rng.uniform(-4, 0), 10 ** rng.uniform(-3, 0)
        got = lmmse_symbols(Y, G, sigma2, P_d, pats)
        want = oracles.lmmse_dense(Y, G, sigma2, P_d, pats)
        worst = max(worst, np.linalg.norm(got - want) / np.linalg.norm(want))
    ok = worst <= 1e-9
    acceptance(3, ok, f"LMMSE vs dense inverse, 100 instances: worst relative error {worst:.2e}")
    assert ok


def test_04_omp_exact_recovery(acceptance):
    rng = np.random.default_rng(104)
    hits = oracle_agree = 0
    for t in range(1000):
        cb = generate_pilot_codebook(int(rng.integers(2**63)), 64, 128, 1.0)
        support = sorted(rng.choice(128, 3, replace=False).tolist())
        Y = cb.A[:, support] @ _crandn(rng, 3, 1)
        det, _ = omp_detect(Y, cb, 3, 1e-9)
        hits += sorted(det) == support
        if t < 50:
            best, _ = oracles.best_support_exhaustive(cb.A, Y, 3)
            oracle_agree += sorted(best) == support
    ok = hits >= 990 and oracle_agree == 50
    acceptance(4, ok, f"OMP noiseless N=128 n_p=64 K=3: {hits}/1000 supports recovered; "
                      f"exhaustive LS oracle confirms truth on {oracle_agree}/50")
    assert ok


def test_05_sic_exactness(acceptance, small_cfg):
    cfg = small_cfg.replace(M_r=2, K_a=6)
    scheme = build_scheme(cfg)
    rng = np.random.default_rng(105)
    worst = 0.0
    for t in range(100):
        frames = [encode_user(m, scheme) for m in draw_messages(1000 + t, cfg.K_a, cfg.B)]
        X = np.stack([f.signal for f in frames])
        g = _crandn(rng, cfg.K_a, 1, cfg.M_r) * 10 ** rng.uniform(-5, -3)
        Z = np.sqrt(cfg.sigma2) * _crandn(rng, cfg.n, cfg.M_r)
        Y = apply_channel(0, X, g, 0.0)[0] + Z
        pilots = [f.pilot_index for f in frames]
        if len(set(pilots)) < len(pilots):
            continue  # genie estimates need distinct pilot rows
        out = sic_subtract(Y, [(f.pilot_index, f.signal) for f in frames], g[:, 0, :], pilots)
        worst = max(worst, abs(np.linalg.norm(out) - np.linalg.norm(Z)) / np.linalg.norm(Z))
    ok = worst <= 1e-6
    acceptance(5, ok, f"genie SIC residual vs noise norm, 100 trials: worst relative gap {worst:.2e}")
    assert ok


def test_06_shadow_statistics(acceptance):
    ue = np.array([[0.0, 0.0], [9.0, 0.0], [18.0, 0.0]])
    topo = make_topology(np.zeros((100_000, 2)) + 300.0, ue)
    F = shadow_fading(106, topo)
    F = F - F.mean(axis=1, keepdims=True)
    emp = F @ F.T / F.shape[1]
    checks = {0: [emp[0, 0], emp[1, 1], emp[2, 2]], 9: [emp[0, 1], emp[1, 2]], 18: [emp[0, 2]]}
    worst = 0.0
    for d, vals in checks.items():
        want = 16.0 * 2.0 ** (-d / 9.0)
        worst = max(worst, max(abs(v - want) / want for v in vals))
    ok = worst <= 0.05
    acceptance(6, ok, f"shadow covariance at d'=0,9,18 m over 1e5 draws: worst relative error {worst:.3f}")
    assert ok


DESK = SystemConfig(n=3200, B=100, K_m=7, P_p=0.01, P_d=0.01, sigma2=dbm_to_watts(-84.0))


@pytest.mark.slow
def test_07_distributed_beats_centralised(acceptance):
    t0 = time.perf_counter()
    dist = estimate_pupe(DESK.replace(K_a=100, M=25, M_r=1), 200)
    cent = estimate_pupe(DESK.replace(K_a=100, M=1, M_r=25), 200)
    elapsed = time.perf_counter() - t0
    ratio = cent.p_e / dist.p_e if dist.p_e > 0 else math.inf
    ok = ratio >= 5.0 and elapsed < 1800
    acceptance(7, ok, f"K_a=100, 200 trials: distributed M=25 p_e={dist.p_e:.4f} (+-{dist.std_err:.4f}), "
                      f"centralised M_r=25 p_e={cent.p_e:.4f} (+-{cent.std_err:.4f}), "
                      f"ratio {ratio:.2f}, {elapsed:.0f} s")
    assert ok


@pytest.mark.slow
def test_08_cooperation_helps(acceptance):
    base = DESK.replace(K_a=50, M=16, M_r=1)
    coop = estimate_pupe(base, 200)
    solo = estimate_pupe(base.replace(mode="nocoop"), 200)
    ok = coop.p_e < solo.p_e and coop.p_e + 2 * coop.std_err < solo.p_e - 2 * solo.std_err
    acceptance(8, ok, f"K_a=50, M=16, 200 trials: coop p_e={coop.p_e:.4f} (+-{coop.std_err:.4f}), "
                      f"no-coop p_e={solo.p_e:.4f} (+-{solo.std_err:.4f})")
    assert ok


def test_09_ebn0_arithmetic(acceptance, tmp_path, small_cfg, capsys):
    # a large pilot space keeps pilot collisions well below the 0.05 target
    cfg = small_cfg.replace(B_p=10, B=28)
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg.to_dict()))
    code = cli.main(["ebn0", "--config", str(cfg_path), "--ka", "2,4,8", "--trials", "3",
                     "--bracket=-30,10", "--tol", "1", "--out", str(tmp_path)])
    capsys.readouterr()
    rows = list(csv.DictReader(open(tmp_path / "ebn0.csv")))
    worst = 0.0
    for r in rows:
        if r["feasible"] != "1":
            continue
        P_p, P_d, s2 = float(r["P_p"]), float(r["P_d"]), float(r["sigma2"])
        want = 10 * math.log10((cfg.n_p * P_p + cfg.n_d * P_d) / (cfg.B * s2))
        worst = max(worst, abs(float(r["ebn0_db"]) - want))
    feasible = sum(r["feasible"] == "1" for r in rows)
    ok = code == 0 and feasible == len(rows) == 3 and worst <= 1e-12
    acceptance(9, ok, f"Eb/N0 recomputed for {feasible} emitted points: worst abs error {worst:.1e} dB")
    assert ok


def test_10_sweep_determinism(acceptance, tmp_path, small_cfg, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(small_cfg.replace(M=6, K_m=4).to_dict()))
    outs = []
    for run in ("a", "b"):
        args = ["sweep", "--config", str(cfg_path), "--ka", "4,8,16,24", "--trials", "20",
                "--out", str(tmp_path / run)]
        assert cli.main(args) == 0
        capsys.readouterr()
        outs.append((tmp_path / run / "sweep.csv").read_bytes())
    ok = outs[0] == outs[1] and len(outs[0].splitlines()) == 5
    acceptance(10, ok, f"two sweep runs: CSV byte-identical={outs[0] == outs[1]} ({len(outs[0])} bytes)")
    assert ok


@pytest.mark.full_scale
def test_11_full_scale_feasibility(acceptance):
    cfg = DESK.replace(K_a=200, M=100, M_r=1, K_m=10)
    trials = int(os.environ.get("CFURA_FULL_TRIALS", "100"))
    t0 = time.perf_counter()
    pt = required_ebn0(cfg, trials, 0.05, bracket_db=(-20.0, 20.0), tol_db=0.5, max_widen=0)
    elapsed = time.perf_counter() - t0
    ok = pt.feasible
    acceptance(11, ok, f"K_a=200, M=100, K_m=10, {trials} trials/point: feasible={pt.feasible}, "
                       f"required Eb/N0 {pt.ebn0_db:.2f} dB (p_e={pt.p_e:.4f}), {elapsed / 60:.0f} min")
    assert ok
