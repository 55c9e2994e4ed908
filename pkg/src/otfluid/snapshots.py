"""Snapshot files: particle CSV, cell-tiling SVG, and metadata JSON.

A snapshot of a run at one step is three sibling files sharing a stem:
`<stem>.csv` holds the particles (exact round-trip floats), `<stem>.svg`
renders the transport cells filled by each particle's color, and
`<stem>.json` records step, time, and the configuration hash so every
artifact is self-describing.  Colors encode the particle's *initial*
position (hue from x, lightness from y), so later snapshots show how the
initial tiling has been transported.
"""

from __future__ import annotations

import colorsys
import csv
import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import IoFailure
from .geometry import Domain

CSV_HEADER = ("id", "x", "y", "vx", "vy", "rho", "color_index")
_COLOR_LEVELS = 1024


_NON_TRAJECTORY_FIELDS = ("output_dir", "snapshot_every", "allow_unstable")


def config_hash(config) -> str:
    """SHA-256 over the trajectory-determining configuration fields.

    Fields that cannot change the computed trajectory (output paths,
    snapshot cadence, the stability override) are excluded, so runs that
    produce the same numbers hash identically.
    """
    payload = {
        k: v
        for k, v in config.to_dict().items()
        if k not in _NON_TRAJECTORY_FIELDS
    }
    digest = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(digest.encode()).hexdigest()


def encode_colors(positions: np.ndarray, domain: Domain) -> np.ndarray:
    """Quantize positions into a single color index per particle.

    The index packs a 1024-level x coordinate (hue) and a 1024-level y
    coordinate (lightness); decode_color turns it back into a fill color.
    """
    xmin, xmax, ymin, ymax = domain.bounds
    p = np.atleast_2d(np.asarray(positions, dtype=float))
    qx = np.clip(
        np.floor(_COLOR_LEVELS * (p[:, 0] - xmin) / (xmax - xmin)),
        0,
        _COLOR_LEVELS - 1,
    ).astype(np.int64)
    qy = np.clip(
        np.floor(_COLOR_LEVELS * (p[:, 1] - ymin) / (ymax - ymin)),
        0,
        _COLOR_LEVELS - 1,
    ).astype(np.int64)
    return qx * _COLOR_LEVELS + qy


def decode_color(index: int) -> str:
    """Hex fill color for a packed color index."""
    qx, qy = divmod(int(index), _COLOR_LEVELS)
    hue = 0.83 * qx / (_COLOR_LEVELS - 1)
    lightness = 0.30 + 0.45 * qy / (_COLOR_LEVELS - 1)
    r, g, b = colorsys.hls_to_rgb(hue, lightness, 0.85)
    return f"#{round(255 * r):02x}{round(255 * g):02x}{round(255 * b):02x}"


def _fmt(x: float) -> str:
    return repr(float(x))


def write_snapshot(state, solution, stem, color_index=None, config_digest: str = ""):
    """Write `<stem>.csv`, `<stem>.svg`, and `<stem>.json` for one state.

    `solution` must be the transport solve at state.positions (its cells
    are what the SVG draws).  color_index defaults to colors computed
    from the *current* positions, which is only right for the initial
    snapshot; callers tracking a run should compute the colors once at
    step 0 and pass the same array every time.
    """
    stem = os.fspath(stem)
    domain = solution.diagram.domain
    if color_index is None:
        color_index = encode_colors(state.positions, domain)
    color_index = np.asarray(color_index, dtype=np.int64)
    try:
        parent = os.path.dirname(stem)
        if parent:
            os.makedirs(parent, exist_ok=True)
        _write_csv(state, color_index, stem + ".csv")
        _write_svg(solution, color_index, stem + ".svg")
        _write_meta(state, config_digest, stem + ".json")
    except OSError as exc:
        raise IoFailure(f"cannot write snapshot {stem}: {exc}") from exc


def _write_csv(state, color_index, path):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for i in range(state.n_particles):
            writer.writerow(
                [
                    str(i),
                    _fmt(state.positions[i, 0]),
                    _fmt(state.positions[i, 1]),
                    _fmt(state.velocities[i, 0]),
                    _fmt(state.velocities[i, 1]),
                    _fmt(state.densities[i]),
                    str(int(color_index[i])),
                ]
            )


def _svg_open(domain: Domain, width_px: int = 720) -> list[str]:
    xmin, xmax, ymin, ymax = domain.bounds
    w = xmax - xmin
    h = ymax - ymin
    height_px = max(1, round(width_px * h / w))
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width_px}" '
        f'height="{height_px}" viewBox="0 0 {w:.10g} {h:.10g}">',
        f'<rect width="{w:.10g}" height="{h:.10g}" fill="#ffffff"/>',
    ]


def _svg_polygon(verts, domain: Domain, fill: str, stroke_width: float) -> str:
    xmin, xmax, ymin, ymax = domain.bounds
    pts = " ".join(
        f"{v[0] - xmin:.6g},{ymax - v[1]:.6g}" for v in verts
    )
    return (
        f'<polygon points="{pts}" fill="{fill}" stroke="{fill}" '
        f'stroke-width="{stroke_width:.6g}" stroke-linejoin="round"/>'
    )


def _write_svg(solution, color_index, path):
    domain = solution.diagram.domain
    xmin, xmax, _, _ = domain.bounds
    stroke = 2e-4 * (xmax - xmin)
    parts = _svg_open(domain)
    cells = solution.diagram.cells
    for i, pieces in enumerate(cells):
        fill = decode_color(color_index[i])
        for verts in pieces:
            parts.append(_svg_polygon(verts, domain, fill, stroke))
    parts.append("</svg>")
    with open(path, "w") as f:
        f.write("\n".join(parts) + "\n")


def write_partition_svg(partition, path):
    """Render a partition's cells (uniform coloring by centroid position)."""
    domain = partition.domain
    colors = encode_colors(partition.centroids, domain)
    xmin, xmax, _, _ = domain.bounds
    stroke = 2e-4 * (xmax - xmin)
    parts = _svg_open(domain)
    for i, pieces in enumerate(partition.cells):
        fill = decode_color(colors[i])
        for verts in pieces:
            parts.append(_svg_polygon(verts, domain, fill, stroke))
    parts.append("</svg>")
    try:
        with open(path, "w") as f:
            f.write("\n".join(parts) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def write_partition(partition, stem):
    """Write `<stem>.csv` (centroids/areas), `<stem>.svg`, `<stem>.json`."""
    stem = os.fspath(stem)
    try:
        parent = os.path.dirname(stem)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(stem + ".csv", "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(("id", "x", "y", "area"))
            for i in range(partition.n_cells):
                writer.writerow(
                    [
                        str(i),
                        _fmt(partition.centroids[i, 0]),
                        _fmt(partition.centroids[i, 1]),
                        _fmt(partition.areas[i]),
                    ]
                )
        write_partition_svg(partition, stem + ".svg")
        record = {
            "n_cells": int(partition.n_cells),
            "h": float(partition.h),
            "iterations": int(partition.iterations),
        }
        with open(stem + ".json", "w") as f:
            json.dump(record, f, sort_keys=True)
            f.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write partition {stem}: {exc}") from exc


def _write_meta(state, config_digest, path):
    record = {
        "step": int(state.step),
        "time": float(state.time),
        "n_particles": int(state.n_particles),
        "config_sha256": config_digest,
    }
    with open(path, "w") as f:
        json.dump(record, f, sort_keys=True)
        f.write("\n")


@dataclass(frozen=True)
class Snapshot:
    """Parsed snapshot CSV."""

    ids: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    densities: np.ndarray
    color_index: np.ndarray


def read_snapshot(path) -> Snapshot:
    """Parse a snapshot CSV (the `<stem>.csv` file) back into arrays."""
    path = os.fspath(path)
    if not path.endswith(".csv"):
        path = path + ".csv"
    try:
        with open(path, newline="") as f:
            reader = csv.reader(f)
            header = next(reader)
            if tuple(header) != CSV_HEADER:
                raise IoFailure(f"unexpected snapshot header in {path}: {header}")
            rows = list(reader)
    except OSError as exc:
        raise IoFailure(f"cannot read snapshot {path}: {exc}") from exc
    ids = np.array([int(r[0]) for r in rows], dtype=np.int64)
    data = np.array([[float(v) for v in r[1:6]] for r in rows])
    colors = np.array([int(r[6]) for r in rows], dtype=np.int64)
    if data.size == 0:
        raise IoFailure(f"snapshot {path} has no particle rows")
    return Snapshot(
        ids=ids,
        positions=data[:, 0:2],
        velocities=data[:, 2:4],
        densities=data[:, 4],
        color_index=colors,
    )


class SnapshotWriter:
    """Run observer writing snapshots every `every` steps.

    Pairs each transport solution with the state it was solved at (the
    stepper hands the new state together with the previous state's
    solution), colors particles by their initial positions, and names
    files `snapshot_<step:06d>`.
    """

    def __init__(self, output_dir, initial_state, domain, every: int, config_digest=""):
        self._dir = os.fspath(output_dir)
        self._prev = initial_state
        self._every = max(1, int(every))
        self._digest = config_digest
        self._colors = encode_colors(initial_state.positions, domain)
        self.written: list[str] = []

    def _emit(self, state, solution):
        stem = os.path.join(self._dir, f"snapshot_{state.step:06d}")
        write_snapshot(state, solution, stem, self._colors, self._digest)
        self.written.append(stem)

    def __call__(self, step_index, time, new_state, solution):
        if self._prev.step % self._every == 0:
            self._emit(self._prev, solution)
        self._prev = new_state

    def finalize(self, final_solution=None):
        if final_solution is not None:
            self._emit(self._prev, final_solution)
        return self.written
