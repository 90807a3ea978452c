"""Numerical reconstruction by angular-spectrum propagation.

A recorded hologram H is turned into an estimate of the scattered field
by subtracting the unit background, and that field is propagated to one
or more planes at height z above the detector by multiplying its spatial
spectrum with the transfer function

    T(fx, fy, z) = exp(i z sqrt(k^2 - (2 pi fx)^2 - (2 pi fy)^2))

on the propagating band, and 0 on the evanescent band (k^2 smaller than
the transverse term).  Zeroing rather than exponentially damping the
evanescent components is the standard numerically-safe choice.

Reconstructions of in-line holograms carry the usual twin-image and
fringe artifacts; positions read off a reconstruction stack are
correspondingly less precise than fitted ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Hologram, OpticalTrain

__all__ = ["ReconstructionStack", "propagate", "propagate_field"]


@dataclass(frozen=True)
class ReconstructionStack:
    """Complex field slices at strictly increasing heights above the detector."""

    volumes: tuple[tuple[float, np.ndarray], ...]
    optics: OpticalTrain

    def __post_init__(self):
        zs = [z for z, _ in self.volumes]
        if any(b <= a for a, b in zip(zs, zs[1:])):
            raise ValueError("slice heights must be strictly increasing")

    @property
    def zs(self) -> tuple[float, ...]:
        return tuple(z for z, _ in self.volumes)

    def slice_at(self, z: float) -> np.ndarray:
        for zz, f in self.volumes:
            if zz == z:
                return f
        raise KeyError(f"no slice at z = {z}")


def _transfer(shape, spacing, k, z, dtype=complex):
    ny, nx = shape
    fx = np.fft.fftfreq(nx, d=spacing)
    fy = np.fft.fftfreq(ny, d=spacing)
    kx = 2.0 * np.pi * fx[None, :]
    ky = 2.0 * np.pi * fy[:, None]
    kz_sq = k * k - kx * kx - ky * ky
    propagating = kz_sq > 0
    kz = np.sqrt(np.where(propagating, kz_sq, 0.0))
    return np.where(propagating, np.exp(1j * z * kz), 0.0)


def propagate_field(
    field: np.ndarray, spacing: float, optics: OpticalTrain, z: float, pad: bool = False
) -> np.ndarray:
    """Propagate a complex detector-plane field to height z.

    With ``pad=True`` the FFT runs on a grid zero-padded to the next
    power of two in each direction (suppresses wraparound at the expense
    of speed); the returned array is cropped back to the input shape.
    """
    if z < 0:
        raise ValueError(f"propagation distance must be non-negative, got {z}")
    field = np.asarray(field, dtype=complex)
    ny, nx = field.shape
    if pad:
        py = 1 << int(np.ceil(np.log2(2 * ny)))
        px = 1 << int(np.ceil(np.log2(2 * nx)))
        work = np.zeros((py, px), dtype=complex)
        work[:ny, :nx] = field
    else:
        work = field
    t = _transfer(work.shape, spacing, optics.wavenumber, z)
    out = np.fft.ifft2(np.fft.fft2(work) * t)
    return out[:ny, :nx]


def propagate(h: Hologram, z, pad: bool = False) -> ReconstructionStack:
    """Reconstruct a hologram at one or more heights above the detector.

    ``z`` may be a scalar or a sequence of non-negative heights (in the
    hologram's length unit); slices are returned in increasing-z order.
    The propagated quantity is H - 1, the scattered-field estimate.
    """
    if h.optics is None:
        raise ValueError("hologram lacks optics metadata")
    zs = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(zs < 0):
        raise ValueError(f"propagation distances must be non-negative, got {z}")
    if len(np.unique(zs)) != len(zs):
        raise ValueError("propagation distances must be distinct")
    field0 = h.intensity.astype(complex) - 1.0
    volumes = tuple(
        (float(zz), propagate_field(field0, h.grid.spacing, h.optics, float(zz), pad=pad))
        for zz in np.sort(zs)
    )
    return ReconstructionStack(volumes=volumes, optics=h.optics)
