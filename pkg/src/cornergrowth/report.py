"""Experiment reports: CSV/JSON emission with the resolved configuration.

Numbers are written with ``repr`` so a report is a byte-exact function of the
seed and configuration.
"""
from __future__ import annotations

import csv
import io
import json
import math
import subprocess
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from . import __version__

COLUMNS = ("experiment", "rho", "N", "m", "n", "kappa", "replicates",
           "statistic", "value", "stderr", "seed")


@dataclass(frozen=True)
class Row:
    experiment: str
    statistic: str
    value: float
    stderr: Optional[float] = None
    rho: Optional[float] = None
    N: Optional[int] = None
    m: Optional[int] = None
    n: Optional[int] = None
    kappa: Optional[float] = None
    replicates: Optional[int] = None
    seed: Optional[int] = None


@dataclass(frozen=True)
class Check:
    """A contract evaluated on a run. ``exact`` marks the 1e-9 class."""

    name: str
    passed: bool
    value: float
    threshold: str
    exact: bool = False
    detail: str = ""


def version_string() -> str:
    """``git describe`` of the source tree when available, else the package version."""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent, capture_output=True, text=True, timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def _json_num(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    rows: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    version: str = field(default_factory=version_string)

    @property
    def exact_failures(self) -> list:
        return [c for c in self.checks if c.exact and not c.passed]

    @property
    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            d = asdict(r)
            w.writerow([_fmt(d[c]) for c in COLUMNS])
        for c in self.checks:
            w.writerow([self.experiment, "", "", "", "", "", "", f"check:{c.name}",
                        _fmt(float(c.value)), "", _fmt(self.config.get("seed"))])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "experiment": self.experiment,
            "version": self.version,
            "config": self.config,
            "rows": [{k: _json_num(v) for k, v in asdict(r).items()} for r in self.rows],
            "checks": [{**asdict(c), "value": _json_num(float(c.value))} for c in self.checks],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def write(self, path, fmt: str = "csv") -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        text = self.to_csv() if fmt == "csv" else self.to_json()
        path.write_text(text)
        if fmt == "csv":
            meta = path.with_suffix(path.suffix + ".meta.json")
            meta.write_text(json.dumps({"experiment": self.experiment, "version": self.version,
                                        "config": self.config,
                                        "checks": [asdict(c) for c in self.checks]},
                                       indent=2, sort_keys=True, default=_json_num) + "\n")
        return path


def plot_report(report: ExperimentReport, path) -> Optional[Path]:
    """Render value-vs-N panels, one per statistic, to a PNG.  Returns None if nothing to plot."""
    series: dict[str, list] = {}
    for r in report.rows:
        if r.N is not None and r.value is not None and math.isfinite(r.value):
            series.setdefault(r.statistic, []).append(r)
    series = {k: v for k, v in series.items() if len({r.N for r in v}) >= 2}
    if not series:
        return None
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    k = len(series)
    fig, axes = plt.subplots(k, 1, figsize=(5, 2.4 * k), squeeze=False)
    for ax, (name, rs) in zip(axes[:, 0], sorted(series.items())):
        rs = sorted(rs, key=lambda r: r.N)
        x = [r.N for r in rs]
        y = [r.value for r in rs]
        e = [r.stderr or 0.0 for r in rs]
        ax.errorbar(x, y, yerr=e, marker="o", ms=3, capsize=2)
        ax.set_xscale("log")
        if all(v > 0 for v in y):
            ax.set_yscale("log")
        ax.set_title(name, fontsize=9)
        ax.set_xlabel("N")
    fig.suptitle(report.experiment, fontsize=10)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
    return path
