"""Triangular-lattice air-hole crystal and its rasterization onto a 2D grid.

Lengths are measured in units of the lattice constant a; the value of
lattice_constant itself is metadata carried through to output files.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

DEFECT_KINDS = ("none", "central_site_removed")

# lattice vectors a*(1, 0) and a*(1/2, sqrt(3)/2)
_SQRT3_2 = math.sqrt(3.0) / 2.0


@dataclass(frozen=True)
class CrystalGeometry:
    """Finite triangular lattice of circular holes centred on the origin.

    num_periods counts rings of holes (all sites within num_periods * a of
    the origin); num_periods = 0 gives a structure-free uniform medium,
    used for vacuum and homogeneous-dielectric reference runs.
    """

    lattice_constant: float = 1.0
    hole_radius: float = 0.45
    eps_background: float = 13.0
    eps_hole: float = 1.0
    num_periods: int = 5
    defect: str = "central_site_removed"

    def __post_init__(self):
        if not self.lattice_constant > 0:
            raise ValueError(f"lattice_constant must be > 0, got {self.lattice_constant}")
        if not 0 < self.hole_radius < 0.5:
            raise ValueError(
                f"hole_radius must lie in (0, 0.5) lattice units to keep "
                f"neighbouring holes disjoint, got {self.hole_radius}"
            )
        if self.eps_background < 1 or self.eps_hole < 1:
            raise ValueError("permittivities must be >= 1")
        if self.num_periods < 0:
            raise ValueError(f"num_periods must be >= 0, got {self.num_periods}")
        if self.defect not in DEFECT_KINDS:
            raise ValueError(f"defect must be one of {DEFECT_KINDS}, got {self.defect!r}")


@dataclass(frozen=True, eq=False)
class RasterGrid:
    """Uniform square sampling of the permittivity, centred on the emitter.

    eps has odd side length so source_index sits exactly at the geometric
    centre; dx = 1/resolution in lattice units.
    """

    eps: np.ndarray
    resolution: int
    lattice_constant: float
    source_index: tuple[int, int]

    @property
    def dx(self) -> float:
        return 1.0 / self.resolution

    @property
    def shape(self) -> tuple[int, int]:
        return self.eps.shape

    @property
    def geometry_hash(self) -> str:
        h = hashlib.sha256()
        h.update(repr((self.eps.shape, self.resolution, self.lattice_constant)).encode())
        h.update(np.ascontiguousarray(self.eps).tobytes())
        return h.hexdigest()[:16]


def build_triangular_lattice(spec: CrystalGeometry) -> np.ndarray:
    """Hole centres (in lattice units) of all sites within num_periods rings.

    Sites are n*a1 + m*a2 with squared distance n^2 + n m + m^2 (an
    integer), so ring membership is decided exactly.  The origin site is
    skipped when the central site is removed.
    """
    p = spec.num_periods
    centers = []
    for n in range(-2 * p, 2 * p + 1):
        for m in range(-2 * p, 2 * p + 1):
            q = n * n + n * m + m * m
            if q > p * p:
                continue
            if q == 0 and spec.defect == "central_site_removed":
                continue
            centers.append((n + 0.5 * m, _SQRT3_2 * m))
    if not centers:
        return np.zeros((0, 2))
    return np.array(centers, dtype=float)


def rasterize(
    spec: CrystalGeometry,
    resolution: int,
    padding: float = 1.5,
    subsamples: int = 16,
) -> RasterGrid:
    """Sample the crystal permittivity onto a uniform grid.

    Cells cut by a hole boundary get an area-weighted average of the two
    permittivities (midpoint supersampling with subsamples^2 points), which
    keeps the staircasing error of the time-domain solver small.  The grid
    spans the crystal plus `padding` lattice units on every side and always
    has an odd number of points so the emitter cell is the exact centre.
    """
    if resolution < 10:
        raise ValueError(f"resolution must be >= 10 points per lattice constant, got {resolution}")
    if padding < 0:
        raise ValueError(f"padding must be >= 0, got {padding}")

    half = spec.num_periods + padding
    n_half = int(round(half * resolution))
    n = 2 * n_half + 1
    dx = 1.0 / resolution
    coords = (np.arange(n) - n_half) * dx

    coverage = np.zeros((n, n))
    r = spec.hole_radius
    half_cell = 0.5 * dx
    # symmetric in-cell offsets; membership counts are exact integers, so a
    # centrosymmetric hole list yields a bit-exact 180-degree symmetric grid
    offs = ((np.arange(subsamples) + 0.5) / subsamples - 0.5) * dx

    for cx, cy in build_triangular_lattice(spec):
        ilo = int(np.searchsorted(coords, cx - r - dx))
        ihi = int(np.searchsorted(coords, cx + r + dx, side="right"))
        jlo = int(np.searchsorted(coords, cy - r - dx))
        jhi = int(np.searchsorted(coords, cy + r + dx, side="right"))
        if ilo >= ihi or jlo >= jhi:
            continue
        ax = np.abs(coords[ilo:ihi] - cx)[:, None]
        ay = np.abs(coords[jlo:jhi] - cy)[None, :]
        far = np.hypot(ax + half_cell, ay + half_cell)
        near = np.hypot(np.maximum(ax - half_cell, 0.0), np.maximum(ay - half_cell, 0.0))
        block = np.zeros(far.shape)
        block[far <= r] = 1.0
        bi, bj = np.nonzero((far > r) & (near < r))
        if bi.size:
            sx = coords[ilo:ihi][bi][:, None, None] - cx + offs[None, :, None]
            sy = coords[jlo:jhi][bj][:, None, None] - cy + offs[None, None, :]
            inside = (sx * sx + sy * sy) <= r * r
            block[bi, bj] = inside.sum(axis=(1, 2)) / float(subsamples**2)
        coverage[ilo:ihi, jlo:jhi] += block

    eps = spec.eps_background + coverage * (spec.eps_hole - spec.eps_background)
    return RasterGrid(
        eps=eps,
        resolution=resolution,
        lattice_constant=spec.lattice_constant,
        source_index=(n_half, n_half),
    )


def uniform_grid(
    eps_value: float,
    half_extent: float,
    resolution: int,
    lattice_constant: float = 1.0,
) -> RasterGrid:
    """Structure-free grid of constant permittivity (reference medium)."""
    if resolution < 10:
        raise ValueError(f"resolution must be >= 10 points per lattice constant, got {resolution}")
    n_half = int(round(half_extent * resolution))
    n = 2 * n_half + 1
    return RasterGrid(
        eps=np.full((n, n), float(eps_value)),
        resolution=resolution,
        lattice_constant=lattice_constant,
        source_index=(n_half, n_half),
    )


def matching_uniform(grid: RasterGrid, eps_value: float) -> RasterGrid:
    """Uniform grid with the exact shape and spacing of an existing grid."""
    return RasterGrid(
        eps=np.full(grid.eps.shape, float(eps_value)),
        resolution=grid.resolution,
        lattice_constant=grid.lattice_constant,
        source_index=grid.source_index,
    )
