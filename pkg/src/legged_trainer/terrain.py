"""Heightfield terrain: flat ground, uniform slopes, fractal rough ground.

A heightfield is a regular x-y grid of heights with bilinear interpolation
between nodes. Fields are immutable after generation and safe to share
between environments.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_SIZE = 25.0
DEFAULT_CELL = 0.05

PERLIN_OCTAVES = 5
PERLIN_LACUNARITY = 3.0
PERLIN_GAIN = 0.45

# eight unit-ish gradient directions for classic 2D gradient noise
_GRADS = np.array(
    [(1, 1), (-1, 1), (1, -1), (-1, -1), (1, 0), (-1, 0), (0, 1), (0, -1)],
    dtype=float,
)


@dataclass(frozen=True)
class Heightfield:
    heights: np.ndarray          # (ny, nx), meters
    cell: float
    origin: tuple                # world (x, y) of node [0, 0]
    kind: str = "flat"
    params: dict = field(default_factory=dict)

    @property
    def extent(self) -> tuple:
        ny, nx = self.heights.shape
        return (nx - 1) * self.cell, (ny - 1) * self.cell

    def height_at(self, x: float, y: float):
        """Bilinear height and unit surface normal at one point."""
        hs, normals = heights_at(self, np.array([x]), np.array([y]))
        return float(hs[0]), normals[0]

    def dump_csv(self, path) -> None:
        np.savetxt(path, self.heights, delimiter=",", fmt="%.6g")


def heights_at(terrain: Heightfield, xs: np.ndarray, ys: np.ndarray):
    """Vectorized bilinear height + analytic patch normal.

    Out-of-range queries clamp to the border. Returns (heights (n,),
    normals (n, 3)).
    """
    h = terrain.heights
    ny, nx = h.shape
    gx = np.clip((np.asarray(xs) - terrain.origin[0]) / terrain.cell, 0.0, nx - 1.0)
    gy = np.clip((np.asarray(ys) - terrain.origin[1]) / terrain.cell, 0.0, ny - 1.0)
    i = np.minimum(gx.astype(int), nx - 2)
    j = np.minimum(gy.astype(int), ny - 2)
    fx = gx - i
    fy = gy - j

    h00 = h[j, i]
    h10 = h[j, i + 1]
    h01 = h[j + 1, i]
    h11 = h[j + 1, i + 1]
    height = (
        h00 * (1 - fx) * (1 - fy)
        + h10 * fx * (1 - fy)
        + h01 * (1 - fx) * fy
        + h11 * fx * fy
    )
    dhdx = ((h10 - h00) * (1 - fy) + (h11 - h01) * fy) / terrain.cell
    dhdy = ((h01 - h00) * (1 - fx) + (h11 - h10) * fx) / terrain.cell
    normals = np.stack([-dhdx, -dhdy, np.ones_like(dhdx)], axis=-1)
    normals /= np.linalg.norm(normals, axis=-1, keepdims=True)
    return height, normals


def _perlin2d(px: np.ndarray, py: np.ndarray, perm: np.ndarray) -> np.ndarray:
    """Classic gradient noise on arbitrary points (vectorized)."""
    xi = np.floor(px).astype(int)
    yi = np.floor(py).astype(int)
    xf = px - xi
    yf = py - yi
    xi &= 255
    yi &= 255

    def grad_dot(ix, iy, dx, dy):
        g = _GRADS[perm[perm[ix] + iy] & 7]
        return g[..., 0] * dx + g[..., 1] * dy

    n00 = grad_dot(xi, yi, xf, yf)
    n10 = grad_dot(xi + 1, yi, xf - 1, yf)
    n01 = grad_dot(xi, yi + 1, xf, yf - 1)
    n11 = grad_dot(xi + 1, yi + 1, xf - 1, yf - 1)

    u = xf * xf * xf * (xf * (xf * 6 - 15) + 10)
    v = yf * yf * yf * (yf * (yf * 6 - 15) + 10)
    return (
        n00 * (1 - u) * (1 - v)
        + n10 * u * (1 - v)
        + n01 * (1 - u) * v
        + n11 * u * v
    )


def fractal_noise(
    px: np.ndarray,
    py: np.ndarray,
    seed: int,
    octaves: int = PERLIN_OCTAVES,
    lacunarity: float = PERLIN_LACUNARITY,
    gain: float = PERLIN_GAIN,
) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    perm = np.tile(rng.permutation(256), 2)
    # per-octave offsets keep lattice zeros of the octaves from lining up
    offsets = rng.uniform(0.0, 256.0, size=(octaves, 2))
    total = np.zeros_like(px, dtype=float)
    amp = 1.0
    freq = 1.0
    for o in range(octaves):
        total += amp * _perlin2d(px * freq + offsets[o, 0], py * freq + offsets[o, 1], perm)
        amp *= gain
        freq *= lacunarity
    return total


def generate_terrain(
    kind: str,
    params: dict | None = None,
    seed: int = 0,
    size: float = DEFAULT_SIZE,
    cell: float = DEFAULT_CELL,
) -> Heightfield:
    """Build a heightfield, deterministic in (kind, params, seed).

    Kinds: "flat"; "slope" with angle_deg (|angle| <= 30) and optional
    azimuth_deg (uphill direction, default +x); "perlin" with z_scale >= 0
    (peak amplitude after normalization) and optional base_freq in 1/m.
    """
    if cell <= 0:
        raise ValueError("terrain cell size must be positive")
    params = dict(params or {})
    n = int(round(size / cell)) + 1
    half = (n - 1) * cell / 2.0
    origin = (-half, -half)
    coords = np.arange(n) * cell - half
    xg, yg = np.meshgrid(coords, coords)  # x varies along axis 1

    if kind == "flat":
        heights = np.zeros((n, n))
    elif kind == "slope":
        angle = float(params.get("angle_deg", 10.0))
        if abs(angle) > 30.0:
            raise ValueError("slope angle must be within +-30 degrees")
        azimuth = np.deg2rad(float(params.get("azimuth_deg", 0.0)))
        ux, uy = np.cos(azimuth), np.sin(azimuth)
        heights = np.tan(np.deg2rad(angle)) * (xg * ux + yg * uy)
    elif kind == "perlin":
        z_scale = float(params.get("z_scale", 0.21))
        if z_scale < 0:
            raise ValueError("z_scale must be >= 0")
        base_freq = float(params.get("base_freq", 0.15))
        raw = fractal_noise(xg * base_freq, yg * base_freq, seed)
        peak = np.max(np.abs(raw))
        heights = raw * (z_scale / peak) if peak > 0 else raw
    else:
        raise ValueError(f"unknown terrain kind {kind!r}")

    return Heightfield(heights=heights, cell=cell, origin=origin, kind=kind, params=params)


def rough_z_scale(iteration: int, peak: float = 0.21) -> float:
    """Training schedule for the fractal terrain amplitude, iteration >= 1."""
    t = max(int(iteration), 1)
    return min(peak, peak / t)
