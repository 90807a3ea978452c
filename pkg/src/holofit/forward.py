"""Hologram forward model: scattered fields at the detector and their
interference with the transmitted plane wave.

The illumination is a unit-amplitude plane wave travelling in -z with
linear polarization (px, py); the detector samples the z = 0 plane at
pixel centers.  For a sphere centered at C = (x0, y0, z0) the field at a
pixel P is taken in the far-field spherical-wave form

    E_par  = exp(ik(R - z0)) / (-ikR) * S2(theta) * cos(phi')
    E_perp = exp(ik(R - z0)) / (-ikR) * S1(theta) * sin(phi')

with R = |P - C|, cos(theta) = z0/R, phi the azimuth of P about the
particle axis and phi' = phi measured from the polarization direction.
Only the transverse (detector-plane) components are kept.  The phase is
referenced to the particle's z-plane so that the hologram of "nothing"
is exactly 1:

    H = |e_pol + alpha * E_s|^2 = 1 + 2 alpha Re(E_s . e_pol) + alpha^2 |E_s|^2.

The model is valid in the regime kR >> n_max^2 (particle many
wavelengths from the detector).  Cluster holograms superpose the
single-sphere fields coherently, each phase-referenced to its own
center; multiple scattering between spheres is neglected, so results for
nearly-touching spheres are approximate.

All lengths are divided by the vacuum wavelength on entry.  Every
downstream quantity then depends only on length ratios, which makes the
computation exactly agnostic to the caller's choice of length unit.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass, field

import numpy as np

from .core import DetectorGrid, Hologram, OpticalTrain
from .mie import mie_ab_batch, s1_s2
from .scatterers import ParamSpec, Scatterer, Sphere, SphereCluster, from_params

__all__ = [
    "ScatteringTheory",
    "MieLorenzTheory",
    "SuperpositionTheory",
    "AlphaModel",
    "InvalidScattererError",
    "auto_select_theory",
    "scattered_field_at_pixels",
    "synthesize_hologram",
    "simulate_hologram",
]


class InvalidScattererError(ValueError):
    """Raised when a hologram is requested for a physically invalid scatterer."""


def _field_one_sphere(px, py, cx, cy, cz, a, b, khat, pol):
    """Transverse scattered field of a batch of spheres at a set of points.

    Parameters are in wavelength-reduced units: ``px, py`` are (P,) point
    coordinates, ``cx, cy, cz`` are (B,) sphere centers, ``a, b`` are
    (B, N) Mie coefficients, ``khat`` = 2 pi * medium_index, and ``pol``
    the (unit) polarization vector.  Returns (Ex, Ey), each (B, P) complex.
    """
    dx = px[None, :] - cx[:, None]
    dy = py[None, :] - cy[:, None]
    cz = cz[:, None]
    rho_sq = dx * dx + dy * dy
    big_r = np.sqrt(rho_sq + cz * cz)
    cos_theta = cz / big_r
    rho = np.sqrt(rho_sq)
    with np.errstate(invalid="ignore", divide="ignore"):
        cphi = np.where(rho > 0, dx / rho, 1.0)
        sphi = np.where(rho > 0, dy / rho, 0.0)
    cpol, spol = pol
    # angle from the polarization direction: phi' = phi - phi_pol
    cphip = cphi * cpol + sphi * spol
    sphip = sphi * cpol - cphi * spol
    s1, s2 = s1_s2(a, b, cos_theta)
    prefac = np.exp(1j * khat * (big_r - cz)) / (-1j * khat * big_r)
    e_rho = prefac * s2 * cphip
    e_phi = -prefac * s1 * sphip
    ex = e_rho * cphi - e_phi * sphi
    ey = e_rho * sphi + e_phi * cphi
    return ex, ey


def field_at_points_batch(px, py, centers, radii, m_rel, optics: OpticalTrain):
    """Coherent transverse field of B scatterer realizations at P points.

    ``px, py``: (P,) coordinates already divided by the vacuum wavelength;
    ``centers``: (B, ns, 3) reduced sphere centers; ``radii``: (B, ns)
    reduced radii; ``m_rel``: (B, ns) complex particle/medium index
    ratios.  Returns (Ex, Ey) of shape (B, P).
    """
    khat = 2.0 * np.pi * optics.medium_index
    n_spheres = centers.shape[1]
    ex = None
    ey = None
    for s in range(n_spheres):
        a, b = mie_ab_batch(khat * radii[:, s], m_rel[:, s])
        exs, eys = _field_one_sphere(
            px,
            py,
            centers[:, s, 0],
            centers[:, s, 1],
            centers[:, s, 2],
            a,
            b,
            khat,
            optics.polarization,
        )
        ex = exs if ex is None else ex + exs
        ey = eys if ey is None else ey + eys
    return ex, ey


def intensity_from_field(ex, ey, alpha, pol):
    """Interference of the scattered field with the unit transmitted wave.

    H = 1 + 2 alpha Re(E . e_pol) + alpha^2 |E|^2, elementwise.  ``alpha``
    may be scalar or (B,) against (B, P) fields.
    """
    alpha = np.asarray(alpha, dtype=float)
    if alpha.ndim == 1:
        alpha = alpha[:, None]
    cpol, spol = pol
    cross = ex.real * cpol + ey.real * spol
    mag_sq = ex.real**2 + ex.imag**2 + ey.real**2 + ey.imag**2
    return 1.0 + 2.0 * alpha * cross + alpha * alpha * mag_sq


def _reduced_scatterer_arrays(scatterer: Scatterer, wavelength: float):
    """(centers, radii, indices) arrays of shape (1, ns, ...) in reduced units."""
    spheres = scatterer.spheres if isinstance(scatterer, SphereCluster) else (scatterer,)
    centers = np.array([[c / wavelength for c in s.center] for s in spheres])[None, :, :]
    radii = np.array([s.r / wavelength for s in spheres])[None, :]
    indices = np.array([s.n for s in spheres], dtype=complex)[None, :]
    return centers, radii, indices


class ScatteringTheory(abc.ABC):
    """Contract for scattering implementations.

    Given a scatterer and an (P, 3) array of field points relative to the
    detector frame, return the complex vector scattered field at each
    point, as a (P, 3) array.  Implementations must be pure functions of
    their inputs.
    """

    @abc.abstractmethod
    def supports(self, scatterer: Scatterer) -> bool:
        """Whether this theory can handle the given scatterer kind."""

    @abc.abstractmethod
    def scattered_field(
        self, scatterer: Scatterer, points: np.ndarray, optics: OpticalTrain
    ) -> np.ndarray:
        """Complex (P, 3) scattered field at the given (P, 3) points."""


class MieLorenzTheory(ScatteringTheory):
    """Exact Lorenz-Mie scattering for a single homogeneous sphere."""

    def supports(self, scatterer: Scatterer) -> bool:
        return isinstance(scatterer, Sphere)

    def scattered_field(self, scatterer, points, optics):
        if not isinstance(scatterer, Sphere):
            raise TypeError(f"MieLorenzTheory handles Sphere, got {type(scatterer).__name__}")
        bad = scatterer.violations()
        if bad:
            raise InvalidScattererError("; ".join(bad))
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != 3:
            raise ValueError(f"points must have shape (P, 3), got {points.shape}")
        lam = optics.wavelength
        if np.any(np.all(points == np.array(scatterer.center), axis=1)):
            raise ValueError("field point coincides with the sphere center")
        centers, radii, indices = _reduced_scatterer_arrays(scatterer, lam)
        m_rel = indices / optics.medium_index
        # nonzero point z is handled by shifting the sphere: the field
        # depends on the separation vector and the phase reference z0 - z
        px = points[:, 0] / lam
        py = points[:, 1] / lam
        pz = points[:, 2] / lam
        if np.any(pz != 0.0):
            ex = np.empty((1, len(px)), dtype=complex)
            ey = np.empty_like(ex)
            for k in range(len(px)):
                ck = centers.copy()
                ck[0, 0, 2] -= pz[k]
                e1, e2 = field_at_points_batch(
                    px[k : k + 1], py[k : k + 1], ck, radii, m_rel, optics
                )
                ex[0, k] = e1[0, 0]
                ey[0, k] = e2[0, 0]
        else:
            ex, ey = field_at_points_batch(px, py, centers, radii, m_rel, optics)
        out = np.zeros((points.shape[0], 3), dtype=complex)
        out[:, 0] = ex[0]
        out[:, 1] = ey[0]
        return out


class SuperpositionTheory(ScatteringTheory):
    """Coherent superposition of independent single-sphere fields.

    Neglects multiple scattering between spheres; accurate for
    well-separated spheres.
    """

    def __init__(self):
        self._single = MieLorenzTheory()

    def supports(self, scatterer: Scatterer) -> bool:
        return isinstance(scatterer, SphereCluster)

    def scattered_field(self, scatterer, points, optics):
        if not isinstance(scatterer, SphereCluster):
            raise TypeError(
                f"SuperpositionTheory handles SphereCluster, got {type(scatterer).__name__}"
            )
        bad = scatterer.violations()
        if bad:
            raise InvalidScattererError("; ".join(bad))
        total = None
        for s in scatterer.spheres:
            f = self._single.scattered_field(s, points, optics)
            total = f if total is None else total + f
        return total


def auto_select_theory(scatterer: Scatterer) -> ScatteringTheory:
    """Pick the appropriate scattering theory for a scatterer kind."""
    if isinstance(scatterer, Sphere):
        return MieLorenzTheory()
    if isinstance(scatterer, SphereCluster):
        return SuperpositionTheory()
    raise TypeError(
        f"unsupported scatterer kind {type(scatterer).__name__}; "
        "supported kinds: Sphere, SphereCluster"
    )


def scattered_field_at_pixels(
    scatterer: Sphere, grid: DetectorGrid, optics: OpticalTrain
) -> np.ndarray:
    """Scattered field at every pixel of a detector grid.

    Returns a flat (nx * ny, 3) complex array in row-major pixel order
    (the same order as ``grid.pixel_positions()``).
    """
    theory = auto_select_theory(scatterer)
    X, Y = grid.pixel_positions()
    points = np.column_stack([X, Y, np.zeros_like(X)])
    return theory.scattered_field(scatterer, points, optics)


@dataclass(frozen=True)
class AlphaModel:
    """Forward model for inference: scatterer template, parameter spec, and
    the scattered-field scaling factor alpha.

    ``alpha`` is a single degree of freedom multiplying the scattered
    field amplitude, absorbing unmodelled features of the optical train;
    it lives in the ParamSpec (entry named "alpha", fixed or free) and is
    restricted to (0, 2].  The scattering theory is selected automatically
    from the scatterer kind unless one is supplied.
    """

    scatterer: Scatterer
    spec: ParamSpec
    optics: OpticalTrain
    theory: ScatteringTheory = field(default=None)

    def __post_init__(self):
        if not self.spec.has_alpha:
            raise ValueError("AlphaModel requires an 'alpha' entry in the ParamSpec")
        alpha = self.alpha
        if not 0.0 < alpha <= 2.0:
            raise ValueError(f"alpha must lie in (0, 2], got {alpha}")
        if self.theory is None:
            object.__setattr__(self, "theory", auto_select_theory(self.scatterer))
        elif not self.theory.supports(self.scatterer):
            raise TypeError(
                f"{type(self.theory).__name__} does not support "
                f"{type(self.scatterer).__name__}"
            )

    @property
    def alpha(self) -> float:
        """The spec's alpha value (fixed value, or initial guess when free)."""
        for e in self.spec.entries:
            if e.name == "alpha":
                return e.value
        raise AssertionError("unreachable: spec lacks alpha")


def synthesize_hologram(
    model: AlphaModel,
    params: np.ndarray,
    grid: DetectorGrid,
    optics: OpticalTrain | None = None,
) -> Hologram:
    """Simulate the normalized hologram for a free-parameter vector.

    Raises :class:`InvalidScattererError` for parameter vectors flagged
    invalid by the scatterer construction; samplers should test validity
    and assign -inf likelihood instead of calling this.
    """
    scatterer, alpha = from_params(model.spec, params)
    bad = scatterer.violations()
    if bad:
        raise InvalidScattererError("; ".join(bad))
    if alpha is not None and not 0.0 < alpha <= 2.0:
        raise InvalidScattererError(f"alpha must lie in (0, 2], got {alpha}")
    optics = model.optics if optics is None else optics
    return simulate_hologram(scatterer, grid, optics, alpha if alpha is not None else 1.0)


def simulate_hologram(
    scatterer: Scatterer,
    grid: DetectorGrid,
    optics: OpticalTrain,
    alpha: float = 1.0,
) -> Hologram:
    """Hologram of a scatterer on a detector grid (alpha fixed by argument)."""
    bad = scatterer.violations()
    if bad:
        raise InvalidScattererError("; ".join(bad))
    lam = optics.wavelength
    X, Y = grid.pixel_positions()
    centers, radii, indices = _reduced_scatterer_arrays(scatterer, lam)
    m_rel = indices / optics.medium_index
    ex, ey = field_at_points_batch(X / lam, Y / lam, centers, radii, m_rel, optics)
    h = intensity_from_field(ex, ey, float(alpha), optics.polarization)
    return Hologram(
        intensity=h[0].reshape(grid.shape), grid=grid, optics=optics, meta={}
    )
