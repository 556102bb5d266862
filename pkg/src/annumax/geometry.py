"""Value-semantic geometric primitives.

Spheres, thickened regions (annuli and polar caps), hyperplane slabs,
centre-pair direction data, orthogonal projections and the two-route wedge
norm.  All types are immutable values and all operations are pure, so
everything here is safe for unrestricted data-parallel use.

Conventions: points live in ``R^n`` with the last coordinate treated as
vertical; the horizontal slice ``{x_n = 0}`` carries the sphere families
used in experiments, and its evaluation window is the cube ``Q^{n-1}`` with
``Q = [-1/(2 sqrt(n)), 1/(2 sqrt(n))]`` (so the full window has diameter 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "DegenerateDirectionError",
    "DependentBasisError",
    "Sphere",
    "RegionKind",
    "Region",
    "Slab",
    "DirectionData",
    "polar_cap_min_cos",
    "slice_cube_side",
    "centre_distance",
    "unit_direction",
    "region_contains",
    "slab_of_pair",
    "restrict_to_slice",
    "proj_orthocomplement",
    "wedge_norm",
    "wedge_norm_gram",
    "wedge_norm_projection",
]

#: Residual norm below which a vector is declared dependent on a basis.
#: Well inside double-precision noise for the O(1) inputs used here.
DEPENDENT_TOL = 1e-12

#: Relative tolerance to which the two wedge-norm routes must agree.
WEDGE_AGREEMENT_RTOL = 1e-10


class DegenerateDirectionError(ValueError):
    """Raised when a direction is requested between coincident centres."""


class DependentBasisError(ValueError):
    """Raised when vectors expected to be linearly independent are not."""


def polar_cap_min_cos(n: int) -> float:
    """Vertical direction cosine threshold ``1 - 1/(100 n)`` of the polar cap.

    A point ``y`` of the annulus around ``(x, r)`` belongs to the polar cap
    when the outward normal ``(y - x)/|y - x|`` makes direction cosine
    greater than this threshold with the vertical axis, i.e. the normal at
    ``y`` is nearly vertical.  That steepness is exactly what makes vertical
    lines transversal to the cap, and it pins the cap's share of the shell
    at ``(1 - min_cos)/2`` in dimension three.
    """
    if n < 2:
        raise ValueError("dimension must be at least 2")
    return 1.0 - 1.0 / (100.0 * n)


def slice_cube_side(n: int) -> float:
    """Side length ``1/sqrt(n)`` of the evaluation cube ``Q``."""
    if n < 2:
        raise ValueError("dimension must be at least 2")
    return 1.0 / math.sqrt(n)


def _as_vector(x, name: str) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"{name} must be a 1-d real vector")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be finite")
    return v


@dataclass(frozen=True)
class Sphere:
    """Euclidean sphere: centre point and positive radius."""

    centre: np.ndarray
    radius: float

    def __post_init__(self):
        centre = _as_vector(self.centre, "centre")
        centre.flags.writeable = False
        object.__setattr__(self, "centre", centre)
        object.__setattr__(self, "radius", float(self.radius))
        if centre.shape[0] < 2:
            raise ValueError("spheres live in dimension >= 2")
        if not (self.radius > 0.0 and math.isfinite(self.radius)):
            raise ValueError("radius must be positive and finite")

    @property
    def n(self) -> int:
        return self.centre.shape[0]


class RegionKind(Enum):
    ANNULUS = "annulus"
    POLAR_CAP = "polar_cap"


@dataclass(frozen=True)
class Region:
    """Thickness-``delta`` region around a sphere: annulus or polar cap.

    Membership is strict on the radial condition ``||y - x| - r| < delta``;
    the polar cap additionally requires ``y_n - x_n > min_cos * |y - x|``
    with ``min_cos = 1 - 1/(100 n)``, so the cap is the steep north-polar
    part of the annulus and is always contained in it.
    """

    sphere: Sphere
    delta: float
    kind: RegionKind = RegionKind.ANNULUS

    def __post_init__(self):
        object.__setattr__(self, "delta", float(self.delta))
        if not (0.0 < self.delta < 0.5):
            raise ValueError("delta must lie in (0, 1/2)")
        if not isinstance(self.kind, RegionKind):
            raise ValueError("kind must be a RegionKind")

    @property
    def n(self) -> int:
        return self.sphere.n

    @property
    def min_cos(self) -> float:
        return polar_cap_min_cos(self.n)

    def contains(self, point) -> bool:
        return region_contains(self, point)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned bounding box of the region (tight for polar caps)."""
        x = self.sphere.centre
        r = self.sphere.radius
        lo = x - (r + self.delta)
        hi = x + (r + self.delta)
        if self.kind is RegionKind.POLAR_CAP:
            c = self.min_cos
            half_width = (r + self.delta) * math.sqrt(max(1.0 - c * c, 0.0))
            lo = x - half_width
            hi = x + half_width
            lo[-1] = x[-1] + c * max(r - self.delta, 0.0)
            hi[-1] = x[-1] + (r + self.delta)
        return lo, hi


@dataclass(frozen=True)
class Slab:
    """Neighbourhood of the affine hyperplane ``<normal, y> = offset``.

    Membership is non-strict: ``|<normal, y> - offset| <= half_thickness``.
    """

    normal: np.ndarray
    offset: float
    half_thickness: float

    def __post_init__(self):
        normal = _as_vector(self.normal, "normal")
        norm = float(np.linalg.norm(normal))
        if not math.isclose(norm, 1.0, rel_tol=0.0, abs_tol=1e-9):
            raise ValueError("slab normal must be a unit vector")
        normal.flags.writeable = False
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "offset", float(self.offset))
        object.__setattr__(self, "half_thickness", float(self.half_thickness))
        if not self.half_thickness > 0.0:
            raise ValueError("half_thickness must be positive")

    @property
    def n(self) -> int:
        return self.normal.shape[0]

    def contains(self, point) -> bool:
        y = _as_vector(point, "point")
        acc = self.normal[0] * y[0]
        for k in range(1, self.n):
            acc = acc + self.normal[k] * y[k]
        return bool(abs(acc - self.offset) <= self.half_thickness)


@dataclass(frozen=True)
class DirectionData:
    """Distance and unit direction between two sphere centres.

    ``e_horiz`` is the direction re-read in ``R^{n-1}``; it is populated only
    when both centres lie on the horizontal slice ``{x_n = 0}``, where
    ``e_full = (e_horiz, 0)`` holds exactly.
    """

    dist: float
    e_full: np.ndarray = field(repr=False)
    e_horiz: Optional[np.ndarray] = field(default=None, repr=False)


def centre_distance(a: Sphere, b: Sphere) -> float:
    """Euclidean distance between the centres of two spheres."""
    if a.n != b.n:
        raise ValueError("spheres must share a dimension")
    d0 = b.centre[0] - a.centre[0]
    acc = d0 * d0
    for k in range(1, a.n):
        dk = b.centre[k] - a.centre[k]
        acc = acc + dk * dk
    return math.sqrt(acc)


def unit_direction(a: Sphere, b: Sphere) -> DirectionData:
    """Unit vector from the centre of ``a`` towards the centre of ``b``.

    Raises
    ------
    DegenerateDirectionError
        If the centres coincide.
    """
    dist = centre_distance(a, b)
    if dist == 0.0:
        raise DegenerateDirectionError("degenerate direction: coincident centres")
    e_full = (b.centre - a.centre) / dist
    e_full.flags.writeable = False
    e_horiz = None
    if a.centre[-1] == 0.0 and b.centre[-1] == 0.0:
        e_horiz = e_full[:-1].copy()
        e_horiz.flags.writeable = False
    return DirectionData(dist=dist, e_full=e_full, e_horiz=e_horiz)


def region_contains(region: Region, point) -> bool:
    """Exact membership predicate for an annulus or polar cap."""
    y = _as_vector(point, "point")
    x = region.sphere.centre
    if y.shape[0] != x.shape[0]:
        raise ValueError("point dimension mismatch")
    d0 = y[0] - x[0]
    acc = d0 * d0
    for k in range(1, x.shape[0]):
        dk = y[k] - x[k]
        acc = acc + dk * dk
    rho = math.sqrt(acc)
    if not abs(rho - region.sphere.radius) < region.delta:
        return False
    if region.kind is RegionKind.POLAR_CAP:
        vertical = y[-1] - x[-1]
        return bool(vertical > region.min_cos * rho)
    return True


def slab_of_pair(a: Sphere, b: Sphere, delta: float) -> Slab:
    """Slab containing the intersection of the two thickness-``delta`` annuli.

    Subtracting the expanded sphere equations of the pair shows that any
    common point of the two spheres satisfies
    ``<e, y> = (ra^2 - rb^2 - (|xa|^2 - |xb|^2)) / (2 dist)`` with ``e`` the
    unit centre direction.  Letting each radius range over its own
    ``(r - delta, r + delta)`` window moves that right-hand side by strictly
    less than ``((ra + rb) delta + delta^2) / dist``, which is the exact
    half-thickness used here; containment of the annulus intersection is
    therefore guaranteed, not merely asymptotic.
    """
    delta = float(delta)
    if not delta > 0.0:
        raise ValueError("delta must be positive")
    direction = unit_direction(a, b)
    xa = a.centre
    xb = b.centre
    sq_a = float(xa @ xa)
    sq_b = float(xb @ xb)
    offset = (a.radius**2 - b.radius**2 - (sq_a - sq_b)) / (2.0 * direction.dist)
    half = ((a.radius + b.radius) * delta + delta * delta) / direction.dist
    return Slab(normal=direction.e_full, offset=offset, half_thickness=half)


def restrict_to_slice(slab: Slab) -> Slab:
    """Re-read a slab with horizontal normal as a slab in ``R^{n-1}``.

    For a normal of the form ``(u, 0)`` the constraint
    ``|<(u,0), y> - o| <= w`` only involves the horizontal part of ``y``;
    offset and thickness carry over unchanged.
    """
    if slab.normal[-1] != 0.0:
        raise ValueError("slab normal is not horizontal")
    return Slab(
        normal=slab.normal[:-1].copy(),
        offset=slab.offset,
        half_thickness=slab.half_thickness,
    )


def _orthonormalise(basis: Sequence[np.ndarray]) -> np.ndarray:
    """Sequential (modified Gram-Schmidt) orthonormal basis of the span.

    Raises ``DependentBasisError`` when a residual drops below
    ``DEPENDENT_TOL``.
    """
    ortho: list[np.ndarray] = []
    for v in basis:
        w = _as_vector(v, "basis vector").copy()
        for q in ortho:
            w -= (w @ q) * q
        norm = float(np.linalg.norm(w))
        if norm < DEPENDENT_TOL:
            raise DependentBasisError("basis vectors are linearly dependent")
        ortho.append(w / norm)
    return np.array(ortho) if ortho else np.empty((0, 0))


def proj_orthocomplement(basis: Sequence, v) -> np.ndarray:
    """Component of ``v`` orthogonal to the span of ``basis``.

    Computed by sequential orthogonalisation; returns ``v`` itself for an
    empty basis and raises ``DependentBasisError`` on dependent input.
    """
    w = _as_vector(v, "v").copy()
    if len(basis) == 0:
        return w
    for q in _orthonormalise(basis):
        w -= (w @ q) * q
    return w


def wedge_norm_gram(vectors: Sequence) -> float:
    """Wedge norm via the square root of the Gram determinant."""
    mat = np.asarray([_as_vector(v, "vector") for v in vectors], dtype=np.float64)
    gram = mat @ mat.T
    det = float(np.linalg.det(gram))
    return math.sqrt(max(det, 0.0))


def wedge_norm_projection(vectors: Sequence) -> float:
    """Wedge norm via the iterated base-times-height product.

    ``|x1 ^ ... ^ xl| = |x1| * prod_j |proj_perp(x_j)|`` where each ``x_j``
    is projected off the span of its predecessors.  Returns 0 when the
    input is dependent (a residual falls below ``DEPENDENT_TOL``).
    """
    mats = [_as_vector(v, "vector") for v in vectors]
    product = 1.0
    ortho: list[np.ndarray] = []
    for v in mats:
        w = v.copy()
        for q in ortho:
            w -= (w @ q) * q
        norm = float(np.linalg.norm(w))
        if norm < DEPENDENT_TOL:
            return 0.0
        product *= norm
        ortho.append(w / norm)
    return product


def wedge_norm(vectors: Sequence) -> float:
    """Volume of the parallelepiped spanned by ``l <= d`` vectors.

    Computed two ways, Gram determinant and iterated projection product,
    which must agree to ``WEDGE_AGREEMENT_RTOL`` relative whenever the input
    is comfortably independent; the Gram value is returned.  Dependent input
    yields exactly 0.  The cross-check is skipped in the narrow window just
    above the dependence tolerance, where neither route carries ten digits.
    """
    mats = [_as_vector(v, "vector") for v in vectors]
    if not mats:
        raise ValueError("need at least one vector")
    dim = mats[0].shape[0]
    if any(v.shape[0] != dim for v in mats):
        raise ValueError("vectors must share a dimension")
    if len(mats) > dim:
        raise ValueError("cannot wedge more vectors than the dimension")
    proj_value = wedge_norm_projection(mats)
    if proj_value == 0.0:
        return 0.0
    gram_value = wedge_norm_gram(mats)
    scale = 1.0
    for v in mats:
        scale *= float(np.linalg.norm(v))
    if proj_value > 1e-6 * scale:
        tol = WEDGE_AGREEMENT_RTOL * max(gram_value, proj_value)
        if abs(gram_value - proj_value) > tol:
            raise ArithmeticError(
                "wedge-norm routes disagree: "
                f"gram={gram_value!r} projection={proj_value!r}"
            )
    return gram_value
