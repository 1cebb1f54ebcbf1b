"""Record serialization (CSV / NDJSON), run manifests and a minimal SVG line plot."""
from __future__ import annotations

import csv
import io
import json
import math
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Mapping, Sequence

FORMATS = ("csv", "json")


def _plain(value):
    if hasattr(value, "item"):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


def format_records(records: Sequence[Mapping], fmt: str, columns: Sequence[str] | None = None) -> str:
    """Render records as CSV with a header row or newline-delimited JSON."""
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")
    if columns is None:
        columns = list(records[0]) if records else []
    if fmt == "json":
        return "".join(json.dumps({c: _plain(r.get(c)) for c in columns}) + "\n" for r in records)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for r in records:
        writer.writerow({c: _plain(r.get(c)) for c in columns})
    return buf.getvalue()


def package_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


@dataclass
class RunManifest:
    command: str
    parameters: dict
    master_seed: int | None
    outputs: list[str] = field(default_factory=list)
    version: str = field(default_factory=package_version)
    started: float = field(default_factory=time.time)
    wall_clock_s: float | None = None

    def finish(self) -> None:
        self.wall_clock_s = time.time() - self.started

    def to_json(self) -> str:
        data = asdict(self)
        data["python"] = sys.version.split()[0]
        data["platform"] = platform.platform()
        return json.dumps(data, indent=2, sort_keys=True, default=str) + "\n"


def manifest_path(out: str | Path) -> Path:
    out = Path(out)
    return out.with_name(out.name + ".manifest.json")


def write_output(text: str, out: str | None, manifest: RunManifest) -> None:
    """Write ``text`` to ``out`` (or stdout) and the manifest beside it.

    Data files never contain timestamps; those live only in the manifest.
    """
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    manifest.outputs.append(str(path))
    manifest.finish()
    manifest_path(path).write_text(manifest.to_json())


def svg_line_plot(series: Mapping[str, tuple[Sequence[float], Sequence[float]]], xlabel: str, ylabel: str,
                  width: int = 640, height: int = 420) -> str:
    """A bare SVG with axes and one polyline per named series."""
    margin = 60
    xs = [x for xv, _ in series.values() for x in xv]
    ys = [y for _, yv in series.values() for y in yv]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1

    def px(x):
        return margin + (x - x0) / (x1 - x0) * (width - 2 * margin)

    def py(y):
        return height - margin - (y - y0) / (y1 - y0) * (height - 2 * margin)

    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>',
        f'<text x="{width / 2}" y="{height - 15}" text-anchor="middle">{xlabel}</text>',
        f'<text x="15" y="{height / 2}" transform="rotate(-90 15 {height / 2})" text-anchor="middle">{ylabel}</text>',
        f'<text x="{margin}" y="{height - margin + 18}" text-anchor="middle">{x0:.3g}</text>',
        f'<text x="{width - margin}" y="{height - margin + 18}" text-anchor="middle">{x1:.3g}</text>',
        f'<text x="{margin - 5}" y="{height - margin}" text-anchor="end">{y0:.3g}</text>',
        f'<text x="{margin - 5}" y="{margin}" text-anchor="end">{y1:.3g}</text>',
    ]
    for i, (name, (xv, yv)) in enumerate(series.items()):
        color = palette[i % len(palette)]
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xv, yv))
        parts.append(f'<polyline fill="none" stroke="{color}" points="{pts}"/>')
        parts.append(f'<text x="{width - margin + 4}" y="{margin + 16 * i}" fill="{color}">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
