"""File formats: stimulus JSON, kernel grid cache, CSV tables and PGM/PPM images.

Every writer goes through :func:`atomic_write`, which writes a temporary file
next to the target and renames it into place.
"""
from __future__ import annotations

import contextlib
import csv
import io
import json
import math
import os
import struct
import tempfile
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .kernel import FPParams, KernelGrid
from .lifting import StimulusSet
from .se2 import AngleMode, CorticalPoint
from .spectral import AffinityMatrix, PerceptualUnit

GRID_MAGIC = b"SE2K"
GRID_FORMAT_VERSION = 1


def atomic_write(path, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise
    return path


def write_json(path, obj) -> Path:
    return atomic_write(path, (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode())


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


# -- stimulus -------------------------------------------------------------------


def stimulus_to_dict(stim: StimulusSet, config: Optional[dict] = None) -> dict:
    labels = stim.labels
    out = {
        "angle_mode": stim.angle_mode.value,
        "c": stim.input_level_c,
        "elements": [{"x": e.x, "y": e.y, "theta": e.theta,
                      "label": None if labels is None else labels[i]}
                     for i, e in enumerate(stim.elements)],
    }
    if config is not None:
        out["config"] = config
    return out


def stimulus_from_dict(d: dict) -> StimulusSet:
    try:
        mode = AngleMode.parse(d.get("angle_mode", "full"))
        c = float(d["c"])
        elems = d["elements"]
        pts = tuple(CorticalPoint.make(e["x"], e["y"], e["theta"]) for e in elems)
        raw = [e.get("label") for e in elems]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed stimulus: {exc}") from exc
    labels = None if any(v is None for v in raw) or not raw else tuple(int(v) for v in raw)
    return StimulusSet(pts, c, mode, labels)


def write_stimulus(path, stim: StimulusSet, config: Optional[dict] = None) -> Path:
    return write_json(path, stimulus_to_dict(stim, config))


def read_stimulus(path) -> StimulusSet:
    return stimulus_from_dict(read_json(path))


# -- kernel grid cache --------------------------------------------------------------
#
# layout: 4-byte magic "SE2K", uint32 LE header length, UTF-8 JSON header,
# then float64 LE values in (theta, y, x) order, x fastest.


def grid_to_bytes(grid: KernelGrid, extra: Optional[dict] = None) -> bytes:
    nx, ny, nt = grid.shape
    header = {
        "format_version": GRID_FORMAT_VERSION,
        "n_x": nx, "n_y": ny, "n_theta": nt,
        "x_range": list(grid.x_range), "y_range": list(grid.y_range),
        "theta_period": grid.theta_period,
        "normalization": grid.normalization,
        "symmetrized": grid.symmetrized,
        "fp_params": grid.provenance.to_dict() if grid.provenance else None,
        "meta": {k: v for k, v in grid.meta.items() if _jsonable(v)},
    }
    if extra:
        header["extra"] = extra
    hbytes = json.dumps(header, sort_keys=True).encode()
    data = np.ascontiguousarray(grid.values.transpose(2, 1, 0)).astype("<f8").tobytes()
    return GRID_MAGIC + struct.pack("<I", len(hbytes)) + hbytes + data


def _jsonable(v) -> bool:
    try:
        json.dumps(v)
    except TypeError:
        return False
    return True


def grid_from_bytes(blob: bytes) -> KernelGrid:
    if blob[:4] != GRID_MAGIC:
        raise ValueError("not a kernel grid file (bad magic)")
    (hlen,) = struct.unpack("<I", blob[4:8])
    header = json.loads(blob[8:8 + hlen].decode())
    if header.get("format_version") != GRID_FORMAT_VERSION:
        raise ValueError(f"unsupported grid format version {header.get('format_version')}")
    nx, ny, nt = header["n_x"], header["n_y"], header["n_theta"]
    data = np.frombuffer(blob, dtype="<f8", offset=8 + hlen)
    if data.size != nx * ny * nt:
        raise ValueError("grid file is truncated")
    values = data.reshape(nt, ny, nx).transpose(2, 1, 0).astype(np.float64)
    fp = FPParams(**header["fp_params"]) if header.get("fp_params") else None
    return KernelGrid(values, tuple(header["x_range"]), tuple(header["y_range"]),
                      header["theta_period"], header["normalization"], fp,
                      header.get("symmetrized", False), dict(header.get("meta", {})))


def write_grid(path, grid: KernelGrid, extra: Optional[dict] = None) -> Path:
    return atomic_write(path, grid_to_bytes(grid, extra))


def read_grid(path) -> KernelGrid:
    return grid_from_bytes(Path(path).read_bytes())


# -- CSV ------------------------------------------------------------------------------


def _csv_bytes(rows: Iterable[Sequence], header: Optional[Sequence[str]] = None) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue().encode()


def write_affinity(path, A: AffinityMatrix, config: Optional[dict] = None) -> Path:
    """Full symmetric matrix as CSV plus a ``.json`` sidecar with ids and scale."""
    path = Path(path)
    atomic_write(path, _csv_bytes(A.entries.tolist()))
    side = {"element_ids": list(A.element_ids), "scale": A.scale, "diagonal": A.diagonal}
    if config is not None:
        side["config"] = config
    write_json(path.with_suffix(".json"), side)
    return path


def read_affinity(path) -> AffinityMatrix:
    path = Path(path)
    rows = [[float(v) for v in r] for r in csv.reader(path.read_text().splitlines()) if r]
    side = read_json(path.with_suffix(".json"))
    return AffinityMatrix(np.array(rows).reshape(len(rows), -1), tuple(side["element_ids"]),
                          side["scale"], side.get("diagonal", "self"))


def write_spectrum(path, eigenvalues: Sequence[float]) -> Path:
    return atomic_write(path, _csv_bytes(([float(v)] for v in eigenvalues), ["eigenvalue"]))


def write_units(path, units: Sequence[PerceptualUnit], config: Optional[dict] = None) -> Path:
    payload = [u.to_dict() for u in units]
    if config is not None:
        payload = {"units": payload, "config": config}
    return write_json(path, payload)


def read_units(path) -> list[dict]:
    d = read_json(path)
    return d["units"] if isinstance(d, dict) else d


def write_trajectory(path, times: np.ndarray, states: np.ndarray) -> Path:
    header = ["time"] + [f"a_{i}" for i in range(states.shape[1])]
    rows = (np.concatenate([[t], s]) for t, s in zip(times, states))
    return atomic_write(path, _csv_bytes(([float(v) for v in r] for r in rows), header))


def read_trajectory(path) -> tuple[np.ndarray, np.ndarray]:
    lines = Path(path).read_text().splitlines()
    data = np.array([[float(v) for v in r] for r in csv.reader(lines[1:]) if r])
    return data[:, 0], data[:, 1:]


# -- PGM / PPM ----------------------------------------------------------------------


def write_pnm(path, image: np.ndarray) -> Path:
    """8-bit binary PGM (2-d array) or PPM (``(rows, cols, 3)`` array); floats are read as [0, 1]."""
    img = np.asarray(image)
    if img.dtype != np.uint8:
        img = np.clip(np.rint(np.asarray(img, dtype=float) * 255.0), 0, 255).astype(np.uint8)
    if img.ndim == 2:
        magic = b"P5"
    elif img.ndim == 3 and img.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError("image must be (rows, cols) or (rows, cols, 3)")
    head = magic + b"\n%d %d\n255\n" % (img.shape[1], img.shape[0])
    return atomic_write(path, head + img.tobytes())


def read_pgm(path) -> np.ndarray:
    """Binary P5 image as floats in [0, 1]."""
    blob = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while pos < len(blob) and blob[pos:pos + 1].isspace():
            pos += 1
        if blob[pos:pos + 1] == b"#":
            while pos < len(blob) and blob[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        tokens.append(blob[start:pos])
    if tokens[0] != b"P5":
        raise ValueError("only binary PGM (P5) is supported")
    w, h, maxval = (int(t) for t in tokens[1:])
    pos += 1
    dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
    data = np.frombuffer(blob, dtype=dtype, count=w * h, offset=pos)
    return data.reshape(h, w).astype(float) / maxval


def load_config_file(path) -> dict:
    """Flat ``key = value`` text; ``#`` starts a comment."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{n}: expected key = value")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


def finite_or_str(x: float):
    """JSON has no infinities; non-finite values are written as strings."""
    return x if math.isfinite(x) else str(x)
