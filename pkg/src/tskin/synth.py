"""Synthetic labeled corpus: skin-tone ellipses over non-skin scenes.

Scenes combine a gradient illumination ramp, skin-colored ellipses
(the positives), chromatic distractor shapes (hard negatives) and sensor
noise. Ground truth marks ellipse interiors as skin with an undecided
band along the boundary. Sequences translate the ellipses between frames
to exercise motion detection.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import cv2
import numpy as np

from .imgio import Raster, write_pgm, write_ppm

SKIN_TONES = (
    (224, 172, 105),
    (241, 194, 125),
    (198, 134, 66),
    (255, 219, 172),
    (161, 102, 94),
    (141, 85, 36),
)

DISTRACTOR_COLORS = (
    (40, 90, 220),    # blue
    (50, 190, 80),    # green
    (150, 60, 200),   # purple
    (40, 200, 210),   # cyan
    (210, 210, 60),   # yellow
)

BACKGROUND_LOW = (70, 80, 110)
BACKGROUND_HIGH = (150, 160, 200)
UNDECIDED_BAND = 2  # erosion depth of the certain-skin core, in pixels


@dataclass
class Ellipse:
    cx: float
    cy: float
    rx: float
    ry: float
    tone: tuple[int, int, int]
    vx: float = 0.0
    vy: float = 0.0


@dataclass
class Shape:
    kind: str  # "rect" | "circle"
    x: float
    y: float
    w: float
    h: float
    color: tuple[int, int, int]


@dataclass
class Scene:
    width: int
    height: int
    ellipses: list[Ellipse]
    shapes: list[Shape]
    ramp: tuple[float, float]
    noise_sigma: float
    noise_seed: int

    def render(self, t: int = 0) -> tuple[Raster, np.ndarray]:
        """Frame t of the scene as (RGB raster, three-class ground truth)."""
        h, w = self.height, self.width
        xs = np.arange(w, dtype=np.float64)[None, :]
        ys = np.arange(h, dtype=np.float64)[:, None]
        ramp = self.ramp[0] + (self.ramp[1] - self.ramp[0]) * xs / max(1, w - 1)
        ramp = np.broadcast_to(ramp, (h, w))

        img = np.empty((h, w, 3), dtype=np.float64)
        for c in range(3):
            lo, hi = BACKGROUND_LOW[c], BACKGROUND_HIGH[c]
            img[..., c] = lo + (hi - lo) * xs / max(1, w - 1)

        for s in self.shapes:
            if s.kind == "rect":
                m = (xs >= s.x) & (xs < s.x + s.w) & (ys >= s.y) & (ys < s.y + s.h)
            else:
                r = s.w / 2
                m = (xs - s.x) ** 2 + (ys - s.y) ** 2 <= r * r
            for c in range(3):
                img[..., c] = np.where(m, s.color[c], img[..., c])

        skin = np.zeros((h, w), dtype=bool)
        for e in self.ellipses:
            cx = e.cx + e.vx * t
            cy = e.cy + e.vy * t
            m = ((xs - cx) / e.rx) ** 2 + ((ys - cy) / e.ry) ** 2 <= 1.0
            skin |= m
            for c in range(3):
                img[..., c] = np.where(m, e.tone[c], img[..., c])

        img *= ramp[..., None]
        rng = np.random.default_rng(self.noise_seed + t)
        img += rng.normal(0.0, self.noise_sigma, img.shape)
        rgb = Raster("RGB8", np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8))

        kernel = np.ones((3, 3), dtype=np.uint8)
        core = cv2.erode(skin.astype(np.uint8), kernel, iterations=UNDECIDED_BAND)
        halo = cv2.dilate(skin.astype(np.uint8), kernel, iterations=1)
        gt = np.zeros((h, w), dtype=np.uint8)
        gt[halo > 0] = 128
        gt[core > 0] = 255
        return rgb, gt


def random_scene(rng: np.random.Generator, width: int = 320, height: int = 240,
                 motion: bool = False) -> Scene:
    ellipses = []
    rx_lo = min(18.0, width / 8)
    ry_lo = min(18.0, height / 8)
    for _ in range(rng.integers(1, 4)):
        rx = float(rng.uniform(rx_lo, max(rx_lo + 1, width / 6)))
        ry = float(rng.uniform(ry_lo, max(ry_lo + 1, height / 5)))
        e = Ellipse(
            cx=float(rng.uniform(rx + 4, width - rx - 4)),
            cy=float(rng.uniform(ry + 4, height - ry - 4)),
            rx=rx, ry=ry,
            tone=SKIN_TONES[rng.integers(len(SKIN_TONES))],
        )
        if motion:
            e.vx = float(rng.uniform(-3, 3))
            e.vy = float(rng.uniform(-3, 3))
        ellipses.append(e)
    shapes = []
    for _ in range(rng.integers(2, 6)):
        kind = "rect" if rng.random() < 0.5 else "circle"
        shapes.append(Shape(
            kind=kind,
            x=float(rng.uniform(0, width)),
            y=float(rng.uniform(0, height)),
            w=float(rng.uniform(min(12, width / 8), max(13, width / 5))),
            h=float(rng.uniform(min(12, height / 8), max(13, height / 5))),
            color=DISTRACTOR_COLORS[rng.integers(len(DISTRACTOR_COLORS))],
        ))
    return Scene(width, height, ellipses, shapes,
                 ramp=(float(rng.uniform(0.82, 0.95)), float(rng.uniform(1.0, 1.12))),
                 noise_sigma=float(rng.uniform(2.0, 5.0)),
                 noise_seed=int(rng.integers(0, 2**31)))


def generate_corpus(out_dir, count: int, seed: int = 0,
                    width: int = 320, height: int = 240) -> list[str]:
    """Write ``frame%04d.ppm`` + ``frame%04d.gt.pgm`` pairs; returns stems."""
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(seed)
    stems = []
    for i in range(count):
        scene = random_scene(rng, width, height)
        rgb, gt = scene.render()
        stem = f"frame{i:04d}"
        write_ppm(os.path.join(out_dir, stem + ".ppm"), rgb)
        write_pgm(os.path.join(out_dir, stem + ".gt.pgm"), gt)
        stems.append(stem)
    return stems


def generate_sequence(frames: int, seed: int = 0, width: int = 320,
                      height: int = 240) -> list[tuple[Raster, np.ndarray]]:
    """A moving-ellipse frame sequence for stream and bench runs."""
    rng = np.random.default_rng(seed)
    scene = random_scene(rng, width, height, motion=True)
    return [scene.render(t) for t in range(frames)]
