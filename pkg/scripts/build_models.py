"""Regenerate the shipped model files and image fixtures.

    python3 scripts/build_models.py [--out src/edgenode]

Everything is seeded, so rerunning produces byte-identical files.
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from edgenode.pipeline.image import RawBayerImage
from edgenode.pipeline.model import build_micro_model, build_planted_model
from edgenode.scenario_io import PACKAGE_DIR, save_model, write_pgm

# (row, col) of 16x16 white squares on the 128x128 planted frame
PLANTED_SQUARES = ((1, 1), (2, 5), (6, 3))


def planted_frame(squares=PLANTED_SQUARES, side: int = 128, block: int = 16) -> RawBayerImage:
    mosaic = np.zeros((side, side), np.uint8)
    for r, c in squares:
        mosaic[r * block:(r + 1) * block, c * block:(c + 1) * block] = 255
    return RawBayerImage(mosaic)


def scene_frame(seed: int = 7) -> RawBayerImage:
    """640x480 smooth synthetic scene, the camera's native size."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:480, 0:640]
    base = 90 + 60 * np.sin(xx / 53.0) * np.cos(yy / 41.0)
    noise = rng.normal(0, 6, size=base.shape)
    return RawBayerImage(np.clip(np.rint(base + noise), 0, 255).astype(np.uint8))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", type=Path, default=PACKAGE_DIR, help="package data root (default: installed package)")
    args = ap.parse_args()
    models, fixtures = args.out / "models", args.out / "fixtures"
    models.mkdir(parents=True, exist_ok=True)
    fixtures.mkdir(parents=True, exist_ok=True)

    save_model(models / "micro_yolo_192.edgs", build_micro_model(192, seed=0))
    save_model(models / "planted_64.edgs", build_planted_model(64))
    write_pgm(fixtures / "black.pgm", RawBayerImage(np.zeros((480, 640), np.uint8)))
    write_pgm(fixtures / "planted.pgm", planted_frame())
    write_pgm(fixtures / "scene_640x480.pgm", scene_frame())
    for p in sorted([*models.iterdir(), *fixtures.iterdir()]):
        print(f"{p}  {p.stat().st_size} B")


if __name__ == "__main__":
    main()
