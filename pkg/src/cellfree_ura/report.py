"""CSV / JSON / SVG output for sweeps and Eb/N0 searches."""

from __future__ import annotations

import csv
import io
import json
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from . import __version__
from .config import SystemConfig
from .harness import EbN0Point, PupeEstimate

PUPE_FIELDS = ["sweep", "value", "K_a", "p_md", "p_fa", "p_e", "std_err", "trials", "config_hash"]
EBN0_FIELDS = ["K_a", "feasible", "ebn0_db", "P_p", "P_d", "sigma2", "n_p", "n_d", "B", "p_e",
               "evaluations", "config_hash"]

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "cellfree-ura",
}


@dataclass
class PupeRow:
    sweep: str
    value: object
    cfg: SystemConfig
    estimate: PupeEstimate


def _fmt(x) -> str:
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float):
        return repr(float(x))
    return str(x)


def version_string() -> str:
    """Package version plus ``git describe`` of the source tree when available."""
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             cwd=Path(__file__).resolve().parent, capture_output=True,
                             text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def pupe_floor(K_a: int, trials: int) -> float:
    """Smallest non-zero PUPE a Monte Carlo run of this size can resolve."""
    return 1.0 / (K_a * trials)


def pupe_csv_text(rows: Sequence[PupeRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PUPE_FIELDS)
    for r in rows:
        e = r.estimate
        w.writerow([_fmt(v) for v in (r.sweep, r.value, r.cfg.K_a, e.p_md, e.p_fa, e.p_e,
                                      e.std_err, e.trials, r.cfg.config_hash())])
    return buf.getvalue()


def ebn0_csv_text(points: Sequence[EbN0Point], cfgs: Sequence[SystemConfig]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EBN0_FIELDS)
    for p, c in zip(points, cfgs):
        w.writerow([_fmt(v) for v in (p.K_a, p.feasible, p.ebn0_db, p.P_p, p.P_d, p.sigma2,
                                      c.n_p, c.n_d, c.B, p.p_e, p.evaluations, c.config_hash())])
    return buf.getvalue()


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def write_manifest(path: Path, cfg: SystemConfig, **extra) -> None:
    manifest = {
        "version": version_string(),
        "master_seed": cfg.master_seed,
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        **extra,
    }
    _write(path, json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


def _save_svg(fig: Figure, path: Path) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches="tight")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def plot_pupe(rows: Sequence[PupeRow], path: Path, xlabel: str | None = None,
              label: str | None = None) -> Figure:
    """PUPE against the sweep variable on a log axis clamped at the MC resolution."""
    with matplotlib.rc_context(STYLE):
        fig = Figure(figsize=(3.5, 2.6))
        ax = fig.add_subplot()
        floor = min(pupe_floor(r.cfg.K_a, r.estimate.trials) for r in rows)
        xs = [float(r.value) for r in rows]
        ys = [max(r.estimate.p_e, floor) for r in rows]
        ax.semilogy(xs, ys, "o-", label=label or rows[0].cfg.mode)
        ax.set_ylim(bottom=floor, top=max(1.0, max(ys) * 1.5))
        ax.set_xlabel(xlabel or ("Number of active users $K_a$" if rows[0].sweep == "K_a"
                                 else rows[0].sweep))
        ax.set_ylabel("PUPE")
        ax.legend()
        _save_svg(fig, path)
    return fig


def read_overlay(path: str | Path) -> tuple[list[float], list[float]]:
    """Two-column CSV (K_a, Eb/N0 dB) of a reference curve, header optional."""
    xs, ys = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            try:
                x, y = float(row[0]), float(row[1])
            except ValueError:
                continue
            xs.append(x)
            ys.append(y)
    return xs, ys


def plot_ebn0(points: Sequence[EbN0Point], path: Path, target: float,
              overlay: tuple[list[float], list[float]] | None = None,
              overlay_label: str = "reference") -> Figure:
    with matplotlib.rc_context(STYLE):
        fig = Figure(figsize=(3.5, 2.6))
        ax = fig.add_subplot()
        pts = [p for p in points if p.feasible]
        ax.plot([p.K_a for p in pts], [p.ebn0_db for p in pts], "s-", label="proposed")
        if overlay:
            ax.plot(overlay[0], overlay[1], "^--", label=overlay_label)
        ax.set_xlabel("Number of active users $K_a$")
        ax.set_ylabel(f"Required $E_b/N_0$ (dB), PUPE $\\leq$ {target:g}")
        ax.legend()
        _save_svg(fig, path)
    return fig


def emit_pupe(rows: Sequence[PupeRow], out_dir: str | Path, stem: str = "pupe",
              **manifest_extra) -> dict[str, Path]:
    if not rows:
        raise ValueError("no results to emit")
    out = Path(out_dir)
    paths = {"csv": out / f"{stem}.csv", "manifest": out / f"{stem}.json", "svg": out / f"{stem}.svg"}
    _write(paths["csv"], pupe_csv_text(rows))
    write_manifest(paths["manifest"], rows[0].cfg, sweep=rows[0].sweep,
                   values=[r.value for r in rows], **manifest_extra)
    plot_pupe(rows, paths["svg"])
    return paths


def emit_ebn0(points: Sequence[EbN0Point], cfgs: Sequence[SystemConfig], out_dir: str | Path,
              target: float, overlay=None, stem: str = "ebn0", **manifest_extra) -> dict[str, Path]:
    if not points:
        raise ValueError("no results to emit")
    out = Path(out_dir)
    paths = {"csv": out / f"{stem}.csv", "manifest": out / f"{stem}.json", "svg": out / f"{stem}.svg"}
    _write(paths["csv"], ebn0_csv_text(points, cfgs))
    write_manifest(paths["manifest"], cfgs[0], target_pupe=target,
                   K_a=[p.K_a for p in points], **manifest_extra)
    plot_ebn0(points, paths["svg"], target, overlay)
    return paths


def environment_csv_text(topology, F, beta) -> str:
    """One row per (user, AP) pair: positions, distance, shadowing and large-scale gain."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["user", "ap", "user_x", "user_y", "ap_x", "ap_y", "distance_m", "shadow_db", "beta_db"])
    K, M = topology.d.shape
    for i in range(K):
        for m in range(M):
            w.writerow([i, m] + [_fmt(float(v)) for v in (
                topology.user_positions[i, 0], topology.user_positions[i, 1],
                topology.ap_positions[m, 0], topology.ap_positions[m, 1],
                topology.d[i, m], F[i, m], 10.0 * np.log10(beta[i, m]))])
    return buf.getvalue()


def emit_environment(topology, F, beta, path: str | Path) -> Path:
    path = Path(path)
    _write(path, environment_csv_text(topology, F, beta))
    return path
