"""Figure construction for the three CSV kinds.

chi: four panels (one per process-tensor element) with the mean line and a
one-standard-deviation band, plus the oracle curve when a companion theory
CSV is supplied.  witness: simulated and theoretical W^b against the
interruption time T1.  rsweep: deviation sigma against the coupling ratio r,
with the r = 0.14 base point marked when present.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

CHI_HEADER = [
    "tau_fs",
    "chi_aaaa_mean", "chi_aaaa_std",
    "chi_aabb_mean", "chi_aabb_std",
    "chi_bbaa_mean", "chi_bbaa_std",
    "chi_bbbb_mean", "chi_bbbb_std",
]
WITNESS_HEADER = ["T1_fs", "T2_fs", "wb_sim", "wb_theory"]
RSWEEP_HEADER = ["r", "sigma"]

HEADERS = {"chi": CHI_HEADER, "witness": WITNESS_HEADER, "rsweep": RSWEEP_HEADER}

CHI_LABELS = (
    r"$\chi_{\alpha\alpha\alpha\alpha}$",
    r"$\chi_{\alpha\alpha\beta\beta}$",
    r"$\chi_{\beta\beta\alpha\alpha}$",
    r"$\chi_{\beta\beta\beta\beta}$",
)

BASE_POINT_R = 0.14

# deterministic rendering: fixed style, mathtext fonts shipped with matplotlib
STYLE = {
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "font.family": "DejaVu Sans",
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "chiplots",
}


class SchemaError(ValueError):
    """Input CSV header does not match the documented schema."""


@dataclass(frozen=True)
class FigureSpec:
    """What to render: input CSV(s), figure kind, output image path."""

    kind: str  # 'chi' | 'witness' | 'rsweep'
    csv_path: Path
    output_path: Path
    theory_csv: Path | None = None  # optional oracle overlay for kind='chi'

    def __post_init__(self):
        if self.kind not in HEADERS:
            raise ValueError(f"unknown figure kind {self.kind!r}")


def read_table(path: Path, expected_header: list[str]) -> np.ndarray:
    with Path(path).open() as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != expected_header:
            raise SchemaError(
                f"{path}: expected header {','.join(expected_header)!r}, "
                f"got {','.join(header) if header else '<empty>'!r}"
            )
        rows = [[float(c) for c in row] for row in reader if row]
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return np.asarray(rows)


def _render_chi(spec: FigureSpec):
    data = read_table(spec.csv_path, CHI_HEADER)
    tau = data[:, 0]
    theory = None
    if spec.theory_csv is not None:
        theory = read_table(spec.theory_csv, CHI_HEADER)
    fig, axes = plt.subplots(2, 2, figsize=(7.2, 5.4), sharex=True)
    for i, ax in enumerate(axes.flat):
        mean = data[:, 1 + 2 * i]
        std = data[:, 2 + 2 * i]
        ax.fill_between(tau, mean - std, mean + std, color="C0", alpha=0.25,
                        linewidth=0, label=r"$\pm 1$ std")
        ax.plot(tau, mean, color="C0", label="recovered")
        if theory is not None:
            ax.plot(theory[:, 0], theory[:, 1 + 2 * i], color="C3", ls="--", label="oracle")
        ax.set_title(CHI_LABELS[i])
        if i >= 2:
            ax.set_xlabel(r"$\tau$ (fs)")
    axes.flat[0].legend(loc="best", fontsize=8)
    fig.suptitle("Recovered process-tensor elements")
    return fig


def _render_witness(spec: FigureSpec):
    data = read_table(spec.csv_path, WITNESS_HEADER)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(data[:, 0], data[:, 2], "o-", color="C0", label=r"$W^b$ simulated")
    if np.any(np.isfinite(data[:, 3])):
        ax.plot(data[:, 0], data[:, 3], "s--", color="C3", label=r"$W^b$ theory")
    ax.set_xlabel(r"$T_1$ (fs)")
    ax.set_ylabel(r"$W^b$")
    ax.legend(loc="best", fontsize=8)
    fig.suptitle("Coherence witness vs interruption time")
    return fig


def _render_rsweep(spec: FigureSpec):
    data = read_table(spec.csv_path, RSWEEP_HEADER)
    order = np.argsort(data[:, 0])
    r, sigma = data[order, 0], data[order, 1]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(r, sigma, "o-", color="C0")
    base = np.isclose(r, BASE_POINT_R, atol=5e-3)
    if np.any(base):
        ax.plot(r[base], sigma[base], "*", color="C3", markersize=14,
                label=f"base point r = {BASE_POINT_R}")
        ax.legend(loc="best", fontsize=8)
    ax.set_xlabel(r"$r = 2|J|/(\omega_a+\omega_b)$")
    ax.set_ylabel(r"$\sigma$")
    fig.suptitle("Deviation from oracle vs coupling ratio")
    return fig


_RENDERERS = {"chi": _render_chi, "witness": _render_witness, "rsweep": _render_rsweep}


def render(spec: FigureSpec) -> Path:
    """Render the figure and write the image; returns the output path."""
    out = Path(spec.output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context(STYLE):
        fig = _RENDERERS[spec.kind](spec)
        fig.savefig(out, metadata=_strip_metadata(out))
        plt.close(fig)
    return out


def _strip_metadata(out: Path):
    # keep images byte-stable across runs: no creation dates or tool versions
    suffix = out.suffix.lower()
    if suffix == ".png":
        return {"Software": ""}
    if suffix == ".svg":
        return {"Date": None, "Creator": None}
    return None
