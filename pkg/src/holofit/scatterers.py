"""Scatterer descriptions and their mapping to flat parameter vectors.

A :class:`Sphere` or :class:`SphereCluster` describes what sits in the
sample volume; a :class:`ParamSpec` names every degree of freedom
(``sphere[i].x|y|z|r|n`` plus ``alpha``), marks each one free or fixed,
and converts between structured scatterers and the flat vectors the
fitting machinery works with.

Construction is deliberately permissive: parameter vectors proposed
during sampling may violate physical invariants (negative radius, sphere
intersecting the detector plane, overlapping spheres).  Such scatterers
are built anyway and flagged via :meth:`is_valid`, so a likelihood can
assign them zero probability instead of crashing.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .priors import Prior

__all__ = [
    "Sphere",
    "SphereCluster",
    "ParamEntry",
    "ParamSpec",
    "to_params",
    "from_params",
]

_NAME_RE = re.compile(r"^(?:sphere\[(\d+)\]\.)?([xyzrn])$")
_FIELDS = ("x", "y", "z", "r", "n")


@dataclass(frozen=True)
class Sphere:
    """A homogeneous sphere: center (x, y, z), radius r, refractive index n.

    z is the height of the center above the detector plane.  A physically
    valid sphere has r > 0 and z > r (it does not intersect the detector).
    """

    center: tuple[float, float, float]
    r: float
    n: complex

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "r", float(self.r))
        object.__setattr__(self, "n", complex(self.n))

    @property
    def is_valid(self) -> bool:
        return not self.violations()

    def violations(self) -> list[str]:
        """Physical-invariant violations, empty when the sphere is valid."""
        out = []
        if not self.r > 0:
            out.append(f"radius must be positive (r = {self.r})")
        if not self.center[2] > self.r:
            out.append(
                f"sphere intersects the detector plane (z = {self.center[2]}, r = {self.r})"
            )
        if not self.n.real > 0:
            out.append(f"Re(n) must be positive (n = {self.n})")
        return out


@dataclass(frozen=True)
class SphereCluster:
    """A rigid, ordered collection of non-overlapping spheres."""

    spheres: tuple[Sphere, ...]

    def __post_init__(self):
        spheres = tuple(self.spheres)
        if len(spheres) < 1:
            raise ValueError("cluster must contain at least one sphere")
        object.__setattr__(self, "spheres", spheres)

    def __len__(self) -> int:
        return len(self.spheres)

    @property
    def is_valid(self) -> bool:
        return not self.violations()

    def violations(self) -> list[str]:
        out = []
        for i, s in enumerate(self.spheres):
            out.extend(f"sphere[{i}]: {v}" for v in s.violations())
        for i in range(len(self.spheres)):
            for j in range(i + 1, len(self.spheres)):
                ci = np.array(self.spheres[i].center)
                cj = np.array(self.spheres[j].center)
                gap = float(np.linalg.norm(ci - cj))
                if gap < self.spheres[i].r + self.spheres[j].r:
                    out.append(f"spheres {i} and {j} overlap (center distance {gap})")
        return out


Scatterer = Sphere | SphereCluster


def _parse_name(name: str) -> tuple[str, int, str]:
    """Split a parameter name into ("alpha" | "sphere", sphere index, field)."""
    if name == "alpha":
        return ("alpha", -1, "")
    m = _NAME_RE.match(name)
    if m is None:
        raise ValueError(
            f"unknown parameter name {name!r}; expected 'alpha', a bare field "
            f"{_FIELDS}, or 'sphere[i].<field>'"
        )
    idx = int(m.group(1)) if m.group(1) is not None else 0
    return ("sphere", idx, m.group(2))


@dataclass(frozen=True)
class ParamEntry:
    """One named parameter: a fixed value, or a free one with a prior.

    ``value`` holds the fixed value for fixed parameters and the initial
    guess for free ones.
    """

    name: str
    value: float
    prior: Prior | None = None

    @property
    def free(self) -> bool:
        return self.prior is not None

    @property
    def kind(self) -> str:
        return "free" if self.free else "fixed"


@dataclass(frozen=True)
class ParamSpec:
    """Complete, ordered parameter list for a scatterer (plus optional alpha).

    Covers every field of every sphere; free/fixed status is per entry.
    Parameter order is declaration order, and the order of the flat
    vectors used by :func:`to_params` / :func:`from_params`.
    ``index_imag`` carries the fixed imaginary part of each sphere's
    refractive index (the ``n`` entries hold the real part only).
    """

    entries: tuple[ParamEntry, ...]
    index_imag: tuple[float, ...] = ()
    cluster: bool = False

    def __post_init__(self):
        entries = tuple(self.entries)
        object.__setattr__(self, "entries", entries)
        seen: dict[str, int] = {}
        sphere_fields: dict[int, set[str]] = {}
        for e in entries:
            if e.name in seen:
                raise ValueError(f"duplicate parameter name {e.name!r}")
            seen[e.name] = 1
            kind, idx, fld = _parse_name(e.name)
            if kind == "sphere":
                sphere_fields.setdefault(idx, set()).add(fld)
        if not sphere_fields:
            raise ValueError("spec must describe at least one sphere")
        n_spheres = max(sphere_fields) + 1
        for i in range(n_spheres):
            missing = set(_FIELDS) - sphere_fields.get(i, set())
            if missing:
                raise ValueError(f"sphere[{i}] is missing fields {sorted(missing)}")
        imag = tuple(self.index_imag) or (0.0,) * n_spheres
        if len(imag) != n_spheres:
            raise ValueError("index_imag length must equal the number of spheres")
        object.__setattr__(self, "index_imag", imag)
        object.__setattr__(self, "_n_spheres", n_spheres)
        if n_spheres > 1:
            object.__setattr__(self, "cluster", True)

    @classmethod
    def for_scatterer(
        cls,
        scatterer: Scatterer,
        free: dict[str, Prior] | None = None,
        alpha: float | None = None,
        guesses: dict[str, float] | None = None,
    ) -> "ParamSpec":
        """Build a spec from a template scatterer.

        ``free`` maps parameter names to priors; everything else is fixed
        at the template's values.  ``guesses`` overrides initial values for
        free parameters (default: the template value).  ``alpha`` adds an
        ``alpha`` entry when given.
        """
        free = dict(free or {})
        guesses = dict(guesses or {})
        spheres = scatterer.spheres if isinstance(scatterer, SphereCluster) else (scatterer,)
        single = not isinstance(scatterer, SphereCluster)
        entries = []

        def add(name, template_value):
            aliases = [name]
            if single and name.startswith("sphere[0]."):
                aliases.append(name.split(".", 1)[1])
            prior = None
            for alias in aliases:
                if alias in free:
                    prior = free.pop(alias)
            value = template_value
            for alias in aliases:
                if alias in guesses:
                    value = guesses.pop(alias)
            entries.append(ParamEntry(name=name, value=float(value), prior=prior))

        for i, s in enumerate(spheres):
            add(f"sphere[{i}].x", s.center[0])
            add(f"sphere[{i}].y", s.center[1])
            add(f"sphere[{i}].z", s.center[2])
            add(f"sphere[{i}].r", s.r)
            add(f"sphere[{i}].n", s.n.real)
        if alpha is not None or "alpha" in free:
            value = alpha if alpha is not None else guesses.get("alpha", 1.0)
            entries.append(ParamEntry(name="alpha", value=float(value), prior=free.pop("alpha", None)))
        if free:
            raise ValueError(f"free parameters {sorted(free)} not present in scatterer")
        return cls(
            entries=tuple(entries),
            index_imag=tuple(s.n.imag for s in spheres),
            cluster=isinstance(scatterer, SphereCluster),
        )

    @property
    def n_spheres(self) -> int:
        return self._n_spheres

    @property
    def has_alpha(self) -> bool:
        return any(e.name == "alpha" for e in self.entries)

    def free_entries(self) -> tuple[ParamEntry, ...]:
        return tuple(e for e in self.entries if e.free)

    def free_names(self) -> tuple[str, ...]:
        return tuple(e.name for e in self.entries if e.free)

    @property
    def n_free(self) -> int:
        return sum(1 for e in self.entries if e.free)

    def guess(self) -> np.ndarray:
        """Initial values of the free parameters, in spec order."""
        return np.array([e.value for e in self.entries if e.free], dtype=float)

    def priors(self) -> tuple[Prior, ...]:
        return tuple(e.prior for e in self.entries if e.free)

    def recentered(self, centers: dict[str, float]) -> "ParamSpec":
        """New spec with free-parameter priors recentered (widths preserved)
        and guesses moved to the new centers; fixed entries unchanged."""
        entries = []
        for e in self.entries:
            if e.free and e.name in centers:
                c = float(centers[e.name])
                entries.append(ParamEntry(e.name, c, e.prior.recentered(c)))
            else:
                entries.append(e)
        return ParamSpec(
            entries=tuple(entries), index_imag=self.index_imag, cluster=self.cluster
        )


def to_params(
    scatterer: Scatterer, spec: ParamSpec, alpha: float | None = None
) -> np.ndarray:
    """Project a scatterer onto the free-parameter vector of ``spec``.

    The ``alpha`` entry, not being part of the scatterer, is filled from
    the ``alpha`` argument when given and from the spec's stored value
    otherwise.
    """
    spheres = scatterer.spheres if isinstance(scatterer, SphereCluster) else (scatterer,)
    out = []
    for e in spec.entries:
        if not e.free:
            continue
        kind, idx, fld = _parse_name(e.name)
        if kind == "alpha":
            out.append(float(alpha) if alpha is not None else e.value)
            continue
        if idx >= len(spheres):
            raise ValueError(
                f"parameter {e.name!r} refers to sphere {idx} but the scatterer "
                f"has {len(spheres)} sphere(s)"
            )
        s = spheres[idx]
        if fld == "x":
            out.append(s.center[0])
        elif fld == "y":
            out.append(s.center[1])
        elif fld == "z":
            out.append(s.center[2])
        elif fld == "r":
            out.append(s.r)
        else:
            out.append(s.n.real)
    return np.array(out, dtype=float)


def from_params(spec: ParamSpec, v: np.ndarray) -> tuple[Scatterer, float | None]:
    """Rebuild (scatterer, alpha) from a free-parameter vector.

    Free fields come from ``v`` in spec order, fixed fields from the spec.
    Invariant-violating values (r <= 0, z <= r, overlapping spheres) are
    returned as constructed; check ``scatterer.is_valid`` before trusting
    the result.  ``alpha`` is None when the spec has no alpha entry.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (spec.n_free,):
        raise ValueError(
            f"parameter vector has shape {v.shape}, expected ({spec.n_free},)"
        )
    values: dict[str, float] = {}
    it = iter(v)
    for e in spec.entries:
        values[e.name] = float(next(it)) if e.free else e.value
    fields = [
        [values[f"sphere[{i}].{f}"] for f in _FIELDS] for i in range(spec.n_spheres)
    ]
    spheres = tuple(
        Sphere(center=(x, y, z), r=r, n=complex(nr, spec.index_imag[i]))
        for i, (x, y, z, r, nr) in enumerate(fields)
    )
    scatterer: Scatterer = SphereCluster(spheres) if spec.cluster else spheres[0]
    alpha = values.get("alpha")
    return scatterer, alpha
