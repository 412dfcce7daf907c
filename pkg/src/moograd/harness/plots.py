"""Plot-ready data files from a finished run directory."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .runner import columns, read_csv, write_csv


def _scatter_rows(header, data):
    L = columns(header, data, "f_")
    P = columns(header, data, "pref_")
    radius = float(np.max(np.linalg.norm(L, axis=1))) if len(L) else 1.0
    rays = P / np.linalg.norm(P, axis=1, keepdims=True) * radius
    return L, rays


def emit_plot_data(run_dir, svg: bool = True) -> list[Path]:
    """Write scatter / HV-curve CSVs (and optional SVG scatters) for every run.

    For solver and PSL runs each ``seed<k>.csv`` gets ``seed<k>.scatter.csv``
    with the objectives and the end point of each preference ray, scaled to
    the largest objective norm.  For MOBO runs it gets ``seed<k>.hv.csv`` with
    the hypervolume after every evaluation.

    Raises:
        FileNotFoundError: ``run_dir`` has no manifest or no run files.
    """
    run_dir = Path(run_dir)
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.is_file():
        raise FileNotFoundError(f"{run_dir} has no manifest.json; run an experiment into it first")
    manifest = json.loads(manifest_path.read_text())
    written: list[Path] = []
    for cell, rel in manifest["cells"].items():
        for path in sorted((run_dir / rel).glob("seed*.csv")):
            if path.name.count(".") > 1:
                continue  # derived file
            header, data = read_csv(path)
            stem = path.with_suffix("")
            if manifest["kind"] == "mobo":
                out = stem.with_suffix(".hv.csv")
                hv = data[:, header.index("hv")]
                write_csv(out, ["eval", "hv"], [[i + 1, v] for i, v in enumerate(hv)])
                written.append(out)
                continue
            L, rays = _scatter_rows(header, data)
            m = L.shape[1]
            out = stem.with_suffix(".scatter.csv")
            write_csv(out, [*[f"f_{i + 1}" for i in range(m)], *[f"ray_{i + 1}" for i in range(m)]],
                      [[*L[k], *rays[k]] for k in range(len(L))])
            written.append(out)
            if svg and m == 2:
                written.append(_scatter_svg(stem.with_suffix(".svg"), L, rays, f"{cell} ({path.stem})"))
    if not written:
        raise FileNotFoundError(f"no run files under {run_dir}")
    return written


def _scatter_svg(path: Path, L: np.ndarray, rays: np.ndarray, title: str) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "moograd"  # stable element ids
    fig, ax = plt.subplots(figsize=(4, 4))
    for r in rays:
        ax.plot([0, r[0]], [0, r[1]], color="0.8", lw=0.8)
    ax.scatter(L[:, 0], L[:, 1], s=18, color="tab:red", zorder=3)
    ax.set_xlabel("$f_1$")
    ax.set_ylabel("$f_2$")
    ax.set_title(title, fontsize=9)
    ax.set_aspect("equal", adjustable="datalim")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
