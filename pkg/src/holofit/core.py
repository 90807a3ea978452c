"""Optical metadata, detector geometry, and the coordinate-aware hologram container.

Lengths are unit-agnostic: wavelength, pixel spacing, and particle
coordinates must all be expressed in the same unit, chosen by the caller.
The detector plane is fixed at z = 0 with the illumination propagating in
-z (source above, detector below).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "OpticalTrain",
    "DetectorGrid",
    "Hologram",
    "crop",
    "normalize_by_background",
]


@dataclass(frozen=True)
class OpticalTrain:
    """Illumination properties: vacuum wavelength, medium index, polarization.

    ``polarization`` is a linear polarization unit vector (px, py) in the
    detector plane.  The in-medium wavenumber is exposed as ``wavenumber``.
    """

    wavelength: float
    medium_index: float
    polarization: tuple[float, float] = (1.0, 0.0)

    def __post_init__(self):
        if not self.wavelength > 0:
            raise ValueError(f"wavelength must be positive, got {self.wavelength}")
        if not self.medium_index > 0:
            raise ValueError(f"medium_index must be positive, got {self.medium_index}")
        px, py = self.polarization
        norm_sq = px * px + py * py
        if abs(norm_sq - 1.0) > 1e-12:
            raise ValueError(
                f"polarization must be a unit vector; |(px, py)|^2 = {norm_sq!r}"
            )
        object.__setattr__(self, "polarization", (float(px), float(py)))

    @property
    def wavenumber(self) -> float:
        """k = 2 pi * medium_index / wavelength, in radians per length unit."""
        return 2.0 * np.pi * self.medium_index / self.wavelength


@dataclass(frozen=True)
class DetectorGrid:
    """Regular pixel grid in the z = 0 plane.

    Pixel (i, j) sits at physical position
    (origin[0] + i * spacing, origin[1] + j * spacing, 0), with i running
    along x (array columns) and j along y (array rows).  ``origin`` is
    nonzero only for grids derived by cropping, so cropped images keep
    reporting their original physical coordinates.
    """

    nx: int
    ny: int
    spacing: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError(f"pixel counts must be >= 1, got nx={self.nx}, ny={self.ny}")
        if not self.spacing > 0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def shape(self) -> tuple[int, int]:
        """Array shape (ny, nx) of images on this grid."""
        return (self.ny, self.nx)

    @property
    def npixels(self) -> int:
        return self.nx * self.ny

    def x_coords(self) -> np.ndarray:
        return self.origin[0] + self.spacing * np.arange(self.nx)

    def y_coords(self) -> np.ndarray:
        return self.origin[1] + self.spacing * np.arange(self.ny)

    def pixel_positions(self) -> tuple[np.ndarray, np.ndarray]:
        """Flat (X, Y) position arrays of length nx * ny, row-major (y fastest-varying last)."""
        X, Y = np.meshgrid(self.x_coords(), self.y_coords(), indexing="xy")
        return X.ravel(), Y.ravel()

    def position(self, i: int, j: int) -> tuple[float, float, float]:
        """Physical position of pixel (i, j)."""
        return (self.origin[0] + i * self.spacing, self.origin[1] + j * self.spacing, 0.0)


@dataclass(frozen=True)
class Hologram:
    """A normalized 2D intensity image with physical coordinates and optics attached.

    ``intensity`` has shape (ny, nx) and is non-negative; a hologram with
    no scatterer is identically 1. ``meta`` holds arbitrary extra metadata
    as an ordered string-to-string map, preserved by every operation.
    """

    intensity: np.ndarray
    grid: DetectorGrid
    optics: OpticalTrain
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        arr = np.asarray(self.intensity, dtype=float)
        if arr.ndim != 2:
            raise ValueError(f"intensity must be 2D, got shape {arr.shape}")
        if arr.shape != self.grid.shape:
            raise ValueError(
                f"intensity shape {arr.shape} does not match grid shape {self.grid.shape}"
            )
        if np.any(arr < 0):
            raise ValueError("intensity values must be non-negative")
        if self.optics is None:
            raise ValueError("hologram requires optics metadata")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "intensity", arr)
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def shape(self) -> tuple[int, int]:
        return self.intensity.shape

    def with_meta(self, **entries: str) -> "Hologram":
        """Return a copy with extra metadata entries (values coerced to str)."""
        merged = dict(self.meta)
        merged.update({k: str(v) for k, v in entries.items()})
        return replace(self, meta=merged)


def crop(h: Hologram, i0: int, j0: int, width: int, height: int) -> Hologram:
    """Extract the window of ``width`` x ``height`` pixels starting at pixel (i0, j0).

    The returned hologram keeps the input's optics and metadata, and its
    grid reports the original physical coordinates (the pixel offset is
    also recorded in ``meta['crop_offset']``).
    """
    if i0 < 0 or j0 < 0:
        raise ValueError(f"crop window origin ({i0}, {j0}) must be non-negative")
    if width < 1 or height < 1:
        raise ValueError(f"crop window size ({width}, {height}) must be >= 1")
    if i0 + width > h.grid.nx:
        raise ValueError(
            f"crop window exceeds image in x: i0 + width = {i0 + width} > nx = {h.grid.nx}"
        )
    if j0 + height > h.grid.ny:
        raise ValueError(
            f"crop window exceeds image in y: j0 + height = {j0 + height} > ny = {h.grid.ny}"
        )
    sub = h.intensity[j0 : j0 + height, i0 : i0 + width]
    origin = (
        h.grid.origin[0] + i0 * h.grid.spacing,
        h.grid.origin[1] + j0 * h.grid.spacing,
    )
    grid = DetectorGrid(nx=width, ny=height, spacing=h.grid.spacing, origin=origin)
    meta = dict(h.meta)
    prev_i, prev_j = 0, 0
    if "crop_offset" in meta:
        prev_i, prev_j = (int(v) for v in meta["crop_offset"].split(","))
    meta["crop_offset"] = f"{prev_i + i0},{prev_j + j0}"
    return Hologram(intensity=sub, grid=grid, optics=h.optics, meta=meta)


def normalize_by_background(raw: Hologram, background: Hologram) -> Hologram:
    """Divide a raw hologram pointwise by a background image.

    Optics are taken from ``raw``; metadata maps are merged with ``raw``
    winning on key conflicts. The background must be strictly positive.
    """
    if raw.shape != background.shape:
        raise ValueError(
            f"shape mismatch: raw is {raw.shape}, background is {background.shape}"
        )
    bad = np.argwhere(background.intensity <= 0)
    if bad.size:
        j, i = bad[0]
        raise ValueError(
            f"background must be strictly positive; pixel (i={i}, j={j}) is "
            f"{background.intensity[j, i]}"
        )
    meta = dict(background.meta)
    meta.update(raw.meta)
    return Hologram(
        intensity=raw.intensity / background.intensity,
        grid=raw.grid,
        optics=raw.optics,
        meta=meta,
    )
