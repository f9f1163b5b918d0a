"""Shared helpers for the demo scripts."""
import os
from pathlib import Path


def outdir(name):
    root = Path(os.environ.get("NEUROGEOM_OUTPUT_DIR", "demo_output"))
    d = root / name
    d.mkdir(parents=True, exist_ok=True)
    return d
