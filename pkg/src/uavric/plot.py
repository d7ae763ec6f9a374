"""Static SVG plots of an xApp series: throughput and latency against distance."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .xapp_kpm import SeriesPoint  # noqa: E402


def plot_series(series: Sequence[SeriesPoint], out_dir: Union[str, Path]) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    # fixed metadata and hash salt keep the SVG bytes stable between runs
    matplotlib.rcParams["svg.hashsalt"] = "uavric"
    meta = {"Date": None, "Creator": None}
    paths = []
    ues = sorted({p.ue_id for p in series})
    for name, attr, label in (
        ("throughput.svg", "dl_thp_mbps", "DL throughput (Mb/s)"),
        ("latency.svg", "sdu_latency_ms", "mean SDU latency (ms)"),
    ):
        fig, ax = plt.subplots(figsize=(6, 4))
        for ue in ues:
            pts = [p for p in series if p.ue_id == ue and getattr(p, attr) is not None]
            ax.plot([p.horizontal_m for p in pts], [getattr(p, attr) for p in pts], ".", label=f"UE {ue}")
        ax.set_xlabel("horizontal distance (m)")
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
        if ues:
            ax.legend()
        path = out / name
        fig.savefig(path, format="svg", metadata=meta)
        plt.close(fig)
        paths.append(path)
    return paths
