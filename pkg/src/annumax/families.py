"""Sphere families, extremal triples and dyadic tuple classification.

Families are finite collections of spheres with separated centres on the
horizontal slice, radii in ``[1, 2]``, centres inside the window cube
``Q^{n-1}``.  Triples come in three certified flavours: tangent-circle
(enemy) configurations, common-circle collinear configurations, and
transversal generic configurations, with scaling exponents 5/2, 2 and 3
for their triple annulus intersections.  The dyadic machinery classifies
ordered tuples by distance and angular-projection classes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .geometry import (
    DependentBasisError,
    Region,
    RegionKind,
    Sphere,
    proj_orthocomplement,
    slice_cube_side,
    unit_direction,
)
from .volume import mc_volume

__all__ = [
    "DegenerateConfigurationError",
    "SphereFamily",
    "BucketSignature",
    "TripleKind",
    "TripleSpec",
    "family_capacity",
    "random_family",
    "enemy_triple",
    "collinear_triple",
    "generic_triple",
    "dyadic_upper",
    "distance_bucket",
    "angular_bucket",
    "classify_tuple",
    "bucket_audit",
    "BucketAuditReport",
    "cardinality_audit",
    "CardinalityReport",
    "save_family",
    "load_family",
]

#: Grid pitch and jitter, in units of the separation scale ``delta``.
#: pitch - 2*jitter = delta, so pairwise centre distances are >= delta by
#: construction (a pitch of delta itself cannot guarantee that).
_PITCH_FACTOR = 1.25
_JITTER_FACTOR = 0.125


class DegenerateConfigurationError(ValueError):
    """Raised when a requested configuration degenerates geometrically."""


@dataclass(frozen=True)
class SphereFamily:
    """Finite family of spheres with centres on the slice ``{x_n = 0}``."""

    n: int
    delta: float
    centres: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        centres = np.ascontiguousarray(self.centres, dtype=np.float64)
        radii = np.ascontiguousarray(self.radii, dtype=np.float64)
        if centres.ndim != 2 or centres.shape[1] != self.n:
            raise ValueError("centres must have shape (count, n)")
        if radii.shape != (centres.shape[0],):
            raise ValueError("radii must have shape (count,)")
        if centres.shape[0] and np.any(centres[:, -1] != 0.0):
            raise ValueError("family centres must lie on the slice {x_n = 0}")
        half = slice_cube_side(self.n) / 2.0
        if centres.shape[0] and np.any(np.abs(centres[:, :-1]) > half + 1e-12):
            raise ValueError("family centres must lie inside the window cube")
        if centres.shape[0] and (np.any(radii < 1.0) or np.any(radii > 2.0)):
            raise ValueError("family radii must lie in [1, 2]")
        if not (0.0 < self.delta < 0.5):
            raise ValueError("delta must lie in (0, 1/2)")
        centres.flags.writeable = False
        radii.flags.writeable = False
        object.__setattr__(self, "centres", centres)
        object.__setattr__(self, "radii", radii)

    def __len__(self) -> int:
        return self.centres.shape[0]

    def sphere(self, i: int) -> Sphere:
        return Sphere(centre=self.centres[i], radius=float(self.radii[i]))

    @property
    def spheres(self) -> list:
        return [self.sphere(i) for i in range(len(self))]

    def regions(self, kind: RegionKind = RegionKind.POLAR_CAP) -> list:
        return [Region(self.sphere(i), self.delta, kind) for i in range(len(self))]

    def min_pairwise_distance(self) -> float:
        if len(self) < 2:
            return math.inf
        best = math.inf
        pts = self.centres
        for i in range(len(self) - 1):
            d = pts[i + 1 :] - pts[i]
            best = min(best, float(np.sqrt((d * d).sum(axis=1)).min()))
        return best


def _grid_points_per_axis(n: int, delta: float) -> tuple[int, float]:
    side = slice_cube_side(n)
    pitch = _PITCH_FACTOR * delta
    g = int(math.floor(side / pitch)) + 1
    while g > 1 and (g - 1) * pitch + 2.0 * _JITTER_FACTOR * delta > side:
        g -= 1
    return g, pitch


def family_capacity(n: int, delta: float) -> int:
    """Largest family size the jittered grid supports at separation delta."""
    g, _ = _grid_points_per_axis(n, delta)
    return g ** (n - 1)


def random_family(n: int, delta: float, target_count: int, seed: int) -> SphereFamily:
    """Family of ``target_count`` spheres with delta-separated centres.

    Jittered-grid construction: centres occupy distinct cells of a grid of
    pitch ``1.25 delta`` with per-coordinate jitter up to ``delta/8``
    (so the worst-case pairwise distance is exactly delta), subsampled to
    the requested count.  Radii are drawn uniformly from ``[1, 2]``.
    Deterministic for a fixed seed.
    """
    if not (0.0 < delta < 0.5):
        raise ValueError("delta must lie in (0, 1/2)")
    g, pitch = _grid_points_per_axis(n, delta)
    capacity = g ** (n - 1)
    if not 1 <= target_count <= capacity:
        raise ValueError(
            f"target_count {target_count} infeasible: grid capacity is {capacity}"
        )
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    chosen = rng.choice(capacity, size=target_count, replace=False)
    jitter = rng.uniform(
        -_JITTER_FACTOR * delta, _JITTER_FACTOR * delta, size=(target_count, n - 1)
    )
    radii = rng.uniform(1.0, 2.0, size=target_count)

    axis_idx = np.unravel_index(chosen, (g,) * (n - 1))
    origin = -(g - 1) * pitch / 2.0
    centres = np.zeros((target_count, n))
    for a in range(n - 1):
        centres[:, a] = origin + axis_idx[a] * pitch + jitter[:, a]
    return SphereFamily(n=n, delta=delta, centres=centres, radii=radii)


class TripleKind(Enum):
    ENEMY = "enemy"
    COLLINEAR = "collinear"
    GENERIC = "generic"


@dataclass(frozen=True)
class TripleSpec:
    """Three spheres with a certified intersection geometry.

    ``expected_exponent`` is the scaling exponent of the triple annulus
    intersection volume in the thickness: 5/2 for tangent intersection
    circles, 2 for a shared circle, 3 for transversal position.
    """

    kind: TripleKind
    spheres: tuple
    expected_exponent: float
    certificate: dict = field(default_factory=dict)

    def regions(self, delta: float, kind: RegionKind = RegionKind.ANNULUS) -> list:
        return [Region(s, delta, kind) for s in self.spheres]


def enemy_triple(delta, tangency_angle, centre2, centre3) -> TripleSpec:
    """Triple whose first-sphere intersection circles are tangent.

    The first sphere is the unit sphere at the origin; the tangency point
    ``p = (cos a, sin a, 0)`` sits on its equator.  The other two spheres are
    centred at the given horizontal points with radii chosen so both
    intersection circles with the first sphere pass through ``p``.  Since all
    centres are horizontal, both circles have vertical tangents at ``p``,
    hence are mutually tangent there, which inflates the triple annulus
    intersection to the 5/2 power of the thickness.

    Raises ``DegenerateConfigurationError`` when a centre direction is
    parallel to ``p`` (the intersection circle collapses to a point).
    """
    delta = float(delta)
    if not (0.0 < delta < 0.5):
        raise ValueError("delta must lie in (0, 1/2)")
    p2 = np.array([math.cos(tangency_angle), math.sin(tangency_angle)])
    p3 = np.array([p2[0], p2[1], 0.0])
    cents = []
    for label, c in (("centre2", centre2), ("centre3", centre3)):
        c = np.asarray(c, dtype=np.float64)
        if c.shape != (2,):
            raise ValueError(f"{label} must be a point in the plane")
        norm = float(np.linalg.norm(c))
        if norm == 0.0:
            raise ValueError(f"{label} must differ from the origin")
        u = c / norm
        if abs(u[0] * p2[1] - u[1] * p2[0]) < 1e-8:
            raise DegenerateConfigurationError(
                f"{label} is parallel to the tangency point: "
                "the intersection circle degenerates to a point"
            )
        cents.append(c)
    if np.array_equal(cents[0], cents[1]):
        raise ValueError("centre2 and centre3 must be distinct")

    spheres = [Sphere(centre=np.zeros(3), radius=1.0)]
    for c in cents:
        x = np.array([c[0], c[1], 0.0])
        spheres.append(Sphere(centre=x, radius=float(np.linalg.norm(p3 - x))))

    for i in range(3):
        for j in range(i + 1, 3):
            d = float(np.linalg.norm(spheres[i].centre - spheres[j].centre))
            if d < 2.0 * delta:
                raise ValueError("centres closer than 2*delta; triple not separated")

    # Tangent of the circle (sphere_1 meet sphere_j) at p: perpendicular to
    # both the radial direction p and the plane normal, i.e. p x u_j.
    tangents = []
    residual = abs(float(np.linalg.norm(p3)) - 1.0)
    for s in spheres[1:]:
        u = (s.centre - spheres[0].centre) / np.linalg.norm(s.centre)
        tangents.append(np.cross(p3, u))
        residual = max(residual, abs(float(np.linalg.norm(p3 - s.centre)) - s.radius))
    t2, t3 = tangents
    cross = np.cross(t2, t3)
    parallel_defect = float(
        np.linalg.norm(cross) / (np.linalg.norm(t2) * np.linalg.norm(t3))
    )

    certificate = {
        "tangency_point": tuple(float(v) for v in p3),
        "point_on_sphere_residual": residual,
        "tangent_parallel_defect": parallel_defect,
    }
    return TripleSpec(
        kind=TripleKind.ENEMY,
        spheres=tuple(spheres),
        expected_exponent=2.5,
        certificate=certificate,
    )


def collinear_triple(spacing, plane_offset, circle_radius) -> TripleSpec:
    """Triple with collinear centres sharing a common circle.

    Centres sit at ``0, spacing, 2*spacing`` on the first axis; each radius
    is chosen so the sphere contains the circle
    ``{y_1 = plane_offset, y_2^2 + y_3^2 = circle_radius^2}``.  The triple
    annulus intersection is a tube around that circle, scaling with the
    square of the thickness.
    """
    spacing = float(spacing)
    plane_offset = float(plane_offset)
    circle_radius = float(circle_radius)
    if spacing <= 0.0 or circle_radius <= 0.0:
        raise ValueError("spacing and circle_radius must be positive")
    spheres = []
    for k in range(3):
        x1 = k * spacing
        r = math.hypot(plane_offset - x1, circle_radius)
        if not (1.0 <= r <= 2.0):
            raise ValueError(
                f"radius {r:.4f} for centre {x1} falls outside [1, 2]; "
                "adjust plane_offset or circle_radius"
            )
        spheres.append(Sphere(centre=np.array([x1, 0.0, 0.0]), radius=r))

    residual = 0.0
    for s in spheres:
        for angle in (0.0, math.pi / 2.0, math.pi):
            q = np.array(
                [
                    plane_offset,
                    circle_radius * math.cos(angle),
                    circle_radius * math.sin(angle),
                ]
            )
            residual = max(
                residual, abs(float(np.linalg.norm(q - s.centre)) - s.radius)
            )
    certificate = {"circle_point_residual": residual}
    return TripleSpec(
        kind=TripleKind.COLLINEAR,
        spheres=tuple(spheres),
        expected_exponent=2.0,
        certificate=certificate,
    )


def generic_triple(
    seed: int,
    check_delta: float = 2.0**-7,
    check_samples: int = 200_000,
    min_hits: int = 50,
    max_retries: int = 1000,
) -> TripleSpec:
    """Random transversally intersecting triple, certified non-empty.

    Draws triples with pairwise centre distances in ``[0.5, 1]``, an angle
    between the centre-difference directions in ``[pi/3, 2 pi/3]``, and radii
    uniform in ``[1, 2]``, until the triple annulus intersection registers
    Monte-Carlo hits; rejected draws increment the retry counter recorded in
    the certificate.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    retries = 0
    for _ in range(max_retries):
        d2, d3 = rng.uniform(0.5, 1.0, size=2)
        alpha = rng.uniform(0.0, 2.0 * math.pi)
        gamma = rng.uniform(math.pi / 3.0, 2.0 * math.pi / 3.0)
        sign = 1.0 if rng.integers(2) else -1.0
        c2 = d2 * np.array([math.cos(alpha), math.sin(alpha)])
        beta = alpha + sign * gamma
        c3 = d3 * np.array([math.cos(beta), math.sin(beta)])
        radii = rng.uniform(1.0, 2.0, size=3)
        mc_seed = int(rng.integers(2**62))

        d23 = float(np.linalg.norm(c3 - c2))
        if not 0.5 <= d23 <= 1.0:
            retries += 1
            continue
        centres = [np.zeros(3), np.array([*c2, 0.0]), np.array([*c3, 0.0])]
        dists = {(0, 1): d2, (0, 2): d3, (1, 2): d23}
        if any(
            not abs(radii[i] - radii[j]) < d < radii[i] + radii[j]
            for (i, j), d in dists.items()
        ):
            retries += 1
            continue
        spheres = tuple(
            Sphere(centre=c, radius=float(r)) for c, r in zip(centres, radii)
        )
        regions = [Region(s, check_delta, RegionKind.ANNULUS) for s in spheres]
        est = mc_volume(regions, samples=check_samples, seed=mc_seed)
        if est.hits < min_hits:
            retries += 1
            continue
        certificate = {
            "check_delta": check_delta,
            "check_samples": check_samples,
            "check_hits": est.hits,
            "retries": retries,
        }
        return TripleSpec(
            kind=TripleKind.GENERIC,
            spheres=spheres,
            expected_exponent=3.0,
            certificate=certificate,
        )
    raise RuntimeError(f"no non-empty triple found after {max_retries} draws")


def dyadic_upper(x: float) -> float:
    """The unique power of two ``t`` with ``x`` in ``(t/2, t]``."""
    if not x > 0.0:
        raise ValueError("dyadic class requires a positive value")
    mantissa, exponent = math.frexp(x)
    if mantissa == 0.5:
        return math.ldexp(1.0, exponent - 1)
    return math.ldexp(1.0, exponent)


def distance_bucket(c1: Sphere, cj: Sphere, delta: float) -> Optional[float]:
    """Dyadic distance class of a sphere pair, or None at coincident scale.

    Returns the power of two ``t`` with ``dist in (t/2, t]`` (half-open, so
    the classes partition), or None when ``dist < 2 delta``, which routes the
    pair to the coincident-scale class.
    """
    d = float(np.linalg.norm(cj.centre - c1.centre))
    if d < 2.0 * delta:
        return None
    if d > 1.0:
        raise ValueError("centre distance exceeds 1: outside the dyadic range")
    return dyadic_upper(d)


def angular_bucket(
    priors: Sequence[Sphere], cj: Sphere, delta: float, t_j: float
) -> Optional[float]:
    """Dyadic angular class of a new sphere against prior directions.

    Projects the horizontal direction from the first prior to ``cj`` onto
    the orthocomplement of the span of the prior horizontal directions and
    classifies its magnitude ``v`` dyadically; magnitudes ``v <= 2 delta/t_j``
    are degenerate (None), mirroring the split between the angular classes
    and the nearly-dependent class.
    """
    if len(priors) < 2:
        raise ValueError("angular classification needs at least two priors")
    c1 = priors[0]
    dirs = []
    for prior in priors[1:]:
        data = unit_direction(c1, prior)
        if data.e_horiz is None:
            raise ValueError("prior centres must lie on the slice")
        dirs.append(data.e_horiz)
    data_j = unit_direction(c1, cj)
    if data_j.e_horiz is None:
        raise ValueError("sphere centre must lie on the slice")
    w = proj_orthocomplement(dirs, data_j.e_horiz)
    v = float(np.linalg.norm(w))
    if v <= 2.0 * delta / t_j:
        return None
    return dyadic_upper(min(v, 1.0))


@dataclass(frozen=True)
class BucketSignature:
    """Dyadic class of an ordered tuple: (J, t-vector, theta-vector).

    ``t`` carries the distance classes ``t_2 .. t_m``; ``J`` lists the
    indices ``j in {3..m}`` whose angular class is non-degenerate, and
    ``theta`` their classes in the order of ``J``.  Indices outside ``J``
    are implicitly in the degenerate angular class.
    """

    m: int
    J: tuple
    t: tuple
    theta: tuple


def classify_tuple(
    spheres: Sequence[Sphere], delta: float
) -> Optional[BucketSignature]:
    """Classify an ordered tuple, or return None for the coincident class.

    A tuple is coincident when some pairwise centre distance (repetitions
    included) falls below ``2 delta``.  Otherwise every index ``j >= 3`` is
    classified against the reduced prior list: the first two spheres plus
    the earlier members of ``J``, in increasing order, exactly the
    enumeration the degenerate/non-degenerate split induces.
    """
    m = len(spheres)
    if m < 2:
        raise ValueError("tuples must have at least two entries")
    for i in range(m):
        for j in range(i + 1, m):
            if (
                float(np.linalg.norm(spheres[i].centre - spheres[j].centre))
                < 2.0 * delta
            ):
                return None
    t_values = tuple(
        distance_bucket(spheres[0], spheres[j], delta) for j in range(1, m)
    )
    priors = [spheres[0], spheres[1]]
    J: list[int] = []
    thetas: list[float] = []
    for j in range(3, m + 1):
        theta = angular_bucket(priors, spheres[j - 1], delta, t_values[j - 2])
        if theta is None:
            continue
        J.append(j)
        thetas.append(theta)
        priors.append(spheres[j - 1])
    return BucketSignature(m=m, J=tuple(J), t=t_values, theta=tuple(thetas))


@dataclass(frozen=True)
class BucketAuditReport:
    n: int
    m: int
    delta: float
    family_size: int
    total_tuples: int
    coincident_tuples: int
    classified_tuples: int
    bucket_counts: dict
    partition_ok: bool


def _dyadic_upper_array(x: np.ndarray) -> np.ndarray:
    mantissa, exponent = np.frexp(x)
    return np.ldexp(1.0, np.where(mantissa == 0.5, exponent - 1, exponent))


def _bucket_audit_m3(family: SphereFamily, delta: float) -> BucketAuditReport:
    N = len(family)
    n = family.n
    H = family.centres[:, : n - 1]
    diff = H[None, :, :] - H[:, None, :]
    D = np.sqrt((diff * diff).sum(axis=2))
    if np.any(D > 1.0):
        raise ValueError("centre distance exceeds 1: outside the dyadic range")
    with np.errstate(invalid="ignore", divide="ignore"):
        E = diff / D[:, :, None]
        norms = np.sqrt((E * E).sum(axis=2))
        Ehat = E / norms[:, :, None]
    T = np.zeros_like(D)
    ok = D > 0.0
    T[ok] = _dyadic_upper_array(D[ok])

    i_idx, j_idx, k_idx = np.meshgrid(
        np.arange(N), np.arange(N), np.arange(N), indexing="ij"
    )
    i_idx = i_idx.ravel()
    j_idx = j_idx.ravel()
    k_idx = k_idx.ravel()
    coincident = (
        (D[i_idx, j_idx] < 2.0 * delta)
        | (D[i_idx, k_idx] < 2.0 * delta)
        | (D[j_idx, k_idx] < 2.0 * delta)
    )
    sel = ~coincident
    ii, jj, kk = i_idx[sel], j_idx[sel], k_idx[sel]

    # Projection of e(C1,C3) off span(e(C1,C2)), mirroring the sequential
    # orthogonalisation used by classify_tuple.
    e12 = Ehat[ii, jj]
    e13 = E[ii, kk]
    dots = (e13 * e12).sum(axis=1)
    w = e13 - dots[:, None] * e12
    v = np.sqrt((w * w).sum(axis=1))

    t2 = T[ii, jj]
    t3 = T[ii, kk]
    nondeg = v > 2.0 * delta / t3
    theta = np.zeros_like(v)
    theta[nondeg] = _dyadic_upper_array(np.minimum(v[nondeg], 1.0))

    a2 = np.rint(-np.log2(t2)).astype(np.int64)
    a3 = np.rint(-np.log2(t3)).astype(np.int64)
    b = np.zeros_like(a2)
    b[nondeg] = np.rint(-np.log2(theta[nondeg])).astype(np.int64) + 1
    keys = (a2 * 4096 + a3) * 4096 + b
    unique, counts = np.unique(keys, return_counts=True)

    bucket_counts: dict[BucketSignature, int] = {}
    for key, count in zip(unique, counts):
        key = int(key)
        b_part = key % 4096
        a3_part = (key // 4096) % 4096
        a2_part = key // (4096 * 4096)
        t_pair = (math.ldexp(1.0, -a2_part), math.ldexp(1.0, -a3_part))
        if b_part == 0:
            sig = BucketSignature(m=3, J=(), t=t_pair, theta=())
        else:
            sig = BucketSignature(
                m=3, J=(3,), t=t_pair, theta=(math.ldexp(1.0, -(b_part - 1)),)
            )
        bucket_counts[sig] = int(count)

    classified = int(sel.sum())
    total = N**3
    coincident_count = total - classified
    partition_ok = sum(bucket_counts.values()) == classified
    return BucketAuditReport(
        n=n,
        m=3,
        delta=delta,
        family_size=N,
        total_tuples=total,
        coincident_tuples=coincident_count,
        classified_tuples=classified,
        bucket_counts=bucket_counts,
        partition_ok=partition_ok,
    )


def bucket_audit(family: SphereFamily, m: int) -> BucketAuditReport:
    """Classify every ordered m-tuple of the family into dyadic classes.

    Tuples with any pairwise centre distance below ``2 delta`` (repeated
    spheres included) form the coincident class; all remaining tuples are
    classified into exactly one signature.  The report checks the partition
    identity ``classified + coincident == size^m``.
    """
    if m < 2:
        raise ValueError("m must be at least 2")
    if m > family.n:
        raise ValueError("m must not exceed the dimension")
    delta = family.delta
    if len(family) == 0:
        return BucketAuditReport(
            n=family.n,
            m=m,
            delta=delta,
            family_size=0,
            total_tuples=0,
            coincident_tuples=0,
            classified_tuples=0,
            bucket_counts={},
            partition_ok=True,
        )
    if m == 3:
        return _bucket_audit_m3(family, delta)

    spheres = family.spheres
    bucket_counts: dict[BucketSignature, int] = {}
    coincident = 0
    total = 0
    for idx in itertools.product(range(len(spheres)), repeat=m):
        total += 1
        sig = classify_tuple([spheres[i] for i in idx], delta)
        if sig is None:
            coincident += 1
        else:
            bucket_counts[sig] = bucket_counts.get(sig, 0) + 1
    classified = total - coincident
    partition_ok = sum(bucket_counts.values()) == classified
    return BucketAuditReport(
        n=family.n,
        m=m,
        delta=delta,
        family_size=len(family),
        total_tuples=total,
        coincident_tuples=coincident,
        classified_tuples=classified,
        bucket_counts=bucket_counts,
        partition_ok=partition_ok,
    )


@dataclass(frozen=True)
class CardinalityReport:
    """Exhaustive counts of a dyadic class against its closed-form bound."""

    n: int
    j: int
    delta: float
    t: float
    theta: float
    bucket_count: int
    bucket_denominator: float
    bucket_ratio: float
    shell_count: int
    shell_denominator: float
    shell_ratio: float
    degenerate_count: int
    degenerate_denominator: float
    degenerate_ratio: float


def cardinality_audit(
    family: SphereFamily, priors: Sequence[Sphere], t: float, theta: float
) -> CardinalityReport:
    """Count the members of a dyadic class by exhaustive scan.

    Reports the count of spheres at distance class ``t`` from the first
    prior whose angular projection class is ``theta``, against the
    denominator ``theta^{n-j+1} t^{n-1} / delta^{n-1}``; also audits the
    plain distance-shell count against ``(t/delta)^{n-1}`` and the
    degenerate angular class against ``(t/delta)^{len(priors)-1}``.
    """
    n = family.n
    delta = family.delta
    j = len(priors) + 1
    if len(priors) < 2:
        raise ValueError("need at least two priors")
    if j > n:
        raise ValueError("class index j exceeds the dimension")
    if not (delta <= t <= 1.0):
        raise ValueError("t outside [delta, 1]")
    if not (delta / t <= theta <= 1.0):
        raise ValueError("theta outside [delta/t, 1]")

    c1 = priors[0]
    dirs = []
    for prior in priors[1:]:
        data = unit_direction(c1, prior)
        if data.e_horiz is None:
            raise ValueError("prior centres must lie on the slice")
        dirs.append(data.e_horiz)
    basis = []
    for d in dirs:
        w = np.asarray(d, dtype=np.float64).copy()
        for q in basis:
            w -= (w @ q) * q
        norm = float(np.linalg.norm(w))
        if norm < 1e-12:
            raise DependentBasisError("prior directions are linearly dependent")
        basis.append(w / norm)

    H = family.centres[:, : n - 1]
    diff = H - c1.centre[: n - 1]
    dist = np.sqrt((diff * diff).sum(axis=1))
    in_shell = (dist > t / 2.0) & (dist <= t)
    shell_count = int(in_shell.sum())

    bucket_count = 0
    degenerate_count = 0
    if shell_count:
        e = diff[in_shell] / dist[in_shell, None]
        w = e.copy()
        for q in basis:
            w -= (w @ q)[:, None] * q[None, :]
        v = np.sqrt((w * w).sum(axis=1))
        bucket_count = int(((v > theta / 2.0) & (v <= theta)).sum())
        degenerate_count = int((v <= 2.0 * delta / t).sum())

    bucket_denominator = theta ** (n - j + 1) * t ** (n - 1) / delta ** (n - 1)
    shell_denominator = (t / delta) ** (n - 1)
    degenerate_denominator = (t / delta) ** (len(priors) - 1)
    return CardinalityReport(
        n=n,
        j=j,
        delta=delta,
        t=t,
        theta=theta,
        bucket_count=bucket_count,
        bucket_denominator=bucket_denominator,
        bucket_ratio=bucket_count / bucket_denominator,
        shell_count=shell_count,
        shell_denominator=shell_denominator,
        shell_ratio=shell_count / shell_denominator,
        degenerate_count=degenerate_count,
        degenerate_denominator=degenerate_denominator,
        degenerate_ratio=degenerate_count / degenerate_denominator,
    )


def save_family(family: SphereFamily, path) -> None:
    """Write a family as plain-text rows; round-trips bit-exactly."""
    lines = [f"{family.n} {family.delta!r} {len(family)}"]
    for i in range(len(family)):
        coords = " ".join(repr(float(c)) for c in family.centres[i])
        lines.append(f"{coords} {float(family.radii[i])!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_family(path) -> SphereFamily:
    """Read a family written by ``save_family``."""
    text = Path(path).read_text().strip().splitlines()
    header = text[0].split()
    n = int(header[0])
    delta = float(header[1])
    count = int(header[2])
    rows = [line.split() for line in text[1 : 1 + count]]
    if len(rows) != count:
        raise ValueError("family file truncated")
    centres = np.array([[float(v) for v in row[:n]] for row in rows])
    radii = np.array([float(row[n]) for row in rows])
    if count == 0:
        centres = centres.reshape(0, n)
        radii = radii.reshape(0)
    return SphereFamily(n=n, delta=delta, centres=centres, radii=radii)
