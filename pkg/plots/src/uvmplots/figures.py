"""Figure builders over the simulator's CSV outputs.

Each builder validates the CSV header byte-for-byte, then puts the file's
values into matplotlib artists verbatim — no unit conversion, no derived
quantities — so a figure's data layer always round-trips to its input.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

from matplotlib.figure import Figure  # noqa: E402

TIMELINE_HEADER = ["time_s", "cpu_rss_bytes", "gpu_used_bytes"]
ITERATIONS_HEADER = ["iter", "time_s", "gpu_local_read_bytes",
                     "c2c_read_bytes", "writeback_bytes"]
SWEEP_HEADER = ["value", "total_time_s", "t_init_s", "t_compute_s",
                "t_dealloc_s", "c2c_bytes"]
COMPARE_HEADER = ["label", "total_time_s", "speedup_total", "speedup_alloc",
                  "speedup_init", "speedup_compute", "speedup_dealloc",
                  "c2c_bytes_ratio"]


class SchemaError(Exception):
    """CSV header does not match the expected schema."""

    def __init__(self, path, expected, got):
        super().__init__(
            f"{path}: expected header {','.join(expected)!r}, "
            f"got {','.join(got) if got else '<empty file>'!r}")
        self.expected = expected
        self.got = got


def read_csv(path, header: list[str]) -> list[dict[str, str]]:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            got = next(reader)
        except StopIteration:
            raise SchemaError(path, header, [])
        if got != header:
            raise SchemaError(path, header, got)
        return [dict(zip(header, row)) for row in reader if row]


def _floats(rows, key):
    return [float(r[key]) for r in rows]


def timeline_figure(path, title: str | None = None) -> Figure:
    """Two memory-usage series against logical time."""
    rows = read_csv(path, TIMELINE_HEADER)
    fig = Figure(figsize=(7, 3.5))
    ax = fig.add_subplot()
    t = _floats(rows, "time_s")
    ax.plot(t, _floats(rows, "cpu_rss_bytes"), label="cpu_rss_bytes",
            color="tab:blue")
    ax.plot(t, _floats(rows, "gpu_used_bytes"), label="gpu_used_bytes",
            color="tab:orange")
    ax.set_xlabel("time_s")
    ax.set_ylabel("bytes")
    ax.legend(loc="best")
    ax.set_title(title or Path(path).stem)
    fig.tight_layout()
    return fig


def per_iteration_figure(path, title: str | None = None) -> Figure:
    """Iteration time on top, stacked traffic bars below."""
    rows = read_csv(path, ITERATIONS_HEADER)
    fig = Figure(figsize=(7, 5))
    ax_time, ax_traffic = fig.subplots(2, 1, sharex=True)
    iters = _floats(rows, "iter")
    ax_time.plot(iters, _floats(rows, "time_s"), marker="o", color="tab:red",
                 label="time_s")
    ax_time.set_ylabel("time_s")
    ax_time.legend(loc="best")
    ax_time.set_title(title or Path(path).stem)

    bottom = [0.0] * len(rows)
    colors = {"gpu_local_read_bytes": "tab:green",
              "c2c_read_bytes": "tab:orange",
              "writeback_bytes": "tab:purple"}
    for key in ("gpu_local_read_bytes", "c2c_read_bytes", "writeback_bytes"):
        values = _floats(rows, key)
        ax_traffic.bar(iters, values, bottom=bottom, label=key,
                       color=colors[key])
        bottom = [b + v for b, v in zip(bottom, values)]
    ax_traffic.set_xlabel("iter")
    ax_traffic.set_ylabel("bytes")
    ax_traffic.legend(loc="best")
    fig.tight_layout()
    return fig


def sweep_bars_figure(path, title: str | None = None) -> Figure:
    """Grouped phase-time bars per sweep value."""
    rows = read_csv(path, SWEEP_HEADER)
    fig = Figure(figsize=(7, 4))
    ax = fig.add_subplot()
    n = len(rows)
    x = list(range(n))
    width = 0.22
    keys = ["total_time_s", "t_init_s", "t_compute_s", "t_dealloc_s"]
    for i, key in enumerate(keys):
        offs = [v + (i - 1.5) * width for v in x]
        ax.bar(offs, _floats(rows, key), width=width, label=key)
    ax.set_xticks(x)
    ax.set_xticklabels([r["value"] for r in rows])
    ax.set_xlabel("value")
    ax.set_ylabel("seconds")
    ax.legend(loc="best")
    ax.set_title(title or Path(path).stem)
    fig.tight_layout()
    return fig


def speedup_lines_figure(path, title: str | None = None) -> Figure:
    """Per-phase speedup of each report against the baseline."""
    rows = read_csv(path, COMPARE_HEADER)
    fig = Figure(figsize=(7, 4))
    ax = fig.add_subplot()
    x = list(range(len(rows)))
    for key in ("speedup_total", "speedup_alloc", "speedup_init",
                "speedup_compute", "speedup_dealloc"):
        ax.plot(x, _floats(rows, key), marker="o", label=key)
    ax.set_xticks(x)
    ax.set_xticklabels([r["label"] for r in rows], rotation=20, ha="right")
    ax.set_ylabel("speedup vs first")
    ax.axhline(1.0, color="gray", linewidth=0.8, linestyle="--")
    ax.legend(loc="best")
    ax.set_title(title or Path(path).stem)
    fig.tight_layout()
    return fig


FIGURE_KINDS = {
    "timeline": (timeline_figure, 1),
    "per_iteration": (per_iteration_figure, 1),
    "sweep_bars": (sweep_bars_figure, 1),
    "speedup_lines": (speedup_lines_figure, 1),
}


def render(kind: str, csv_paths: list[str], out_path: str,
           title: str | None = None) -> None:
    """Build one figure of the given kind and write it to out_path."""
    if kind not in FIGURE_KINDS:
        raise ValueError(f"unknown figure kind {kind!r}; "
                         f"choose from {sorted(FIGURE_KINDS)}")
    builder, arity = FIGURE_KINDS[kind]
    if len(csv_paths) != arity:
        raise ValueError(f"{kind} takes {arity} CSV file(s), got {len(csv_paths)}")
    fig = builder(csv_paths[0], title=title)
    fig.savefig(out_path)
