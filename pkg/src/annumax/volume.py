"""Volume oracles for intersections of annuli and polar caps.

Two independent routes are provided: seeded Monte-Carlo estimation over a
slab-clipped sampling domain, and voxel-grid rasterisation.  The module also
carries the closed-form predictors these oracles are compared against: the
parallelepiped volume of intersected slabs and the tuple bound
``delta^m / (prod t_j * prod theta_j)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy.special import betainc

from . import _kernels as kernels
from .geometry import (
    DependentBasisError,
    Region,
    RegionKind,
    Slab,
    _orthonormalise,
    unit_direction,
    wedge_norm,
)

__all__ = [
    "Box",
    "VolumeMethod",
    "VolumeEstimate",
    "BoundPrediction",
    "mc_volume",
    "grid_volume",
    "parallelepiped_volume",
    "predicted_tuple_bound",
    "unit_ball_volume",
    "sphere_surface_area",
    "cap_surface_fraction",
    "region_volume_analytic",
    "region_masks",
]

#: Fixed Monte-Carlo chunk length; part of the deterministic contract
#: (chunk ``i`` draws from the substream ``SeedSequence(seed, spawn_key=(i,))``).
MC_CHUNK = 1 << 19

class VolumeMethod(Enum):
    MONTE_CARLO = "monte_carlo"
    GRID = "grid"


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by its lower and upper corners."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.float64)
        hi = np.asarray(self.hi, dtype=np.float64)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("box corners must be 1-d vectors of equal length")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def n(self) -> int:
        return self.lo.shape[0]

    @property
    def empty(self) -> bool:
        return bool(np.any(self.hi <= self.lo))

    @property
    def volume(self) -> float:
        if self.empty:
            return 0.0
        return float(np.prod(self.hi - self.lo))

    @property
    def centre(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def circumradius(self) -> float:
        return 0.5 * float(np.linalg.norm(self.hi - self.lo))


def intersect_boxes(boxes: Sequence[Box]) -> Box:
    lo = np.max([b.lo for b in boxes], axis=0)
    hi = np.min([b.hi for b in boxes], axis=0)
    return Box(lo, hi)


def region_box(region: Region) -> Box:
    lo, hi = region.bounding_box()
    return Box(lo, hi)


@dataclass(frozen=True)
class VolumeEstimate:
    """Estimated n-dimensional volume with its uncertainty.

    For Monte-Carlo estimates ``std_error`` is the binomial error
    ``V * sqrt(p(1-p)/samples)`` over the sampling domain of volume ``V``;
    runs with zero (or full) hits report ``V / samples`` instead, so that
    ``3 * std_error`` is the one-sided 95% bound.  For grid estimates it is
    the discretisation proxy ``h * (total surface bound of the regions)``.
    """

    value: float
    std_error: float
    samples: int
    hits: int
    method: VolumeMethod
    domain_volume: float = 0.0


@dataclass(frozen=True)
class BoundPrediction:
    """Closed-form bound ``delta^m / (prod t_j * prod theta_j)``."""

    m: int
    delta: float
    t_list: tuple
    theta_list: tuple
    value: float


def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def sphere_surface_area(n: int, radius: float) -> float:
    return n * unit_ball_volume(n) * radius ** (n - 1)


def cap_surface_fraction(n: int, min_cos: float) -> float:
    """Fraction of the unit sphere with vertical direction cosine > min_cos.

    In dimension three this is the Archimedes zone value ``(1 - min_cos)/2``;
    in general it is half a regularised incomplete beta.
    """
    if not 0.0 <= min_cos < 1.0:
        raise ValueError("min_cos must lie in [0, 1)")
    return 0.5 * float(betainc((n - 1) / 2.0, 0.5, 1.0 - min_cos * min_cos))


def region_volume_analytic(region: Region) -> float:
    """Exact volume of an annulus or polar cap.

    The radial and angular conditions separate in polar coordinates, so the
    cap volume is exactly the shell volume times the cap surface fraction.
    """
    r = region.sphere.radius
    d = region.delta
    n = region.n
    shell = unit_ball_volume(n) * ((r + d) ** n - max(r - d, 0.0) ** n)
    if region.kind is RegionKind.POLAR_CAP:
        return shell * cap_surface_fraction(n, region.min_cos)
    return shell


def region_masks(points: np.ndarray, region: Region) -> np.ndarray:
    """Boolean membership mask of ``points`` (rows) in ``region``."""
    pts = np.ascontiguousarray(points, dtype=np.float64)
    centre = np.ascontiguousarray(region.sphere.centre)
    if region.kind is RegionKind.POLAR_CAP:
        return kernels.cap_mask(
            pts, centre, region.sphere.radius, region.delta, region.min_cos
        )
    return kernels.annulus_mask(pts, centre, region.sphere.radius, region.delta)


def _pair_slab(a: Region, b: Region) -> Optional[Slab]:
    """Slab containing the intersection of two regions with distinct centres.

    Generalises the equal-thickness construction to per-region deltas: the
    offset window over radii ``r' in (r - delta, r + delta)`` for each side
    has half-width ``((2 ra + da) da + (2 rb + db) db) / (2 dist)``.
    """
    try:
        direction = unit_direction(a.sphere, b.sphere)
    except Exception:
        return None
    xa, xb = a.sphere.centre, b.sphere.centre
    ra, rb = a.sphere.radius, b.sphere.radius
    da, db = a.delta, b.delta
    offset = (ra * ra - rb * rb - (float(xa @ xa) - float(xb @ xb))) / (
        2.0 * direction.dist
    )
    half = ((2.0 * ra + da) * da + (2.0 * rb + db) * db) / (2.0 * direction.dist)
    return Slab(normal=direction.e_full, offset=offset, half_thickness=half)


@dataclass(frozen=True)
class _SamplingDomain:
    """Uniform sampling domain: a parallelepiped in slab coordinates.

    ``matrix`` rows are the selected slab normals followed by an orthonormal
    basis of their complement; sampling draws coordinates uniformly in
    ``[lows, highs]`` and maps them back through the inverse.  The plain-box
    case is ``matrix=None``.
    """

    lows: np.ndarray
    highs: np.ndarray
    matrix: Optional[np.ndarray]
    inverse: Optional[np.ndarray]
    volume: float

    @property
    def empty(self) -> bool:
        return self.volume <= 0.0

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        u = rng.random((count, self.lows.shape[0]))
        coords = self.lows + u * (self.highs - self.lows)
        if self.matrix is None:
            return coords
        return np.ascontiguousarray(coords @ self.inverse.T)


def _box_domain(box: Box) -> _SamplingDomain:
    return _SamplingDomain(
        lows=box.lo, highs=box.hi, matrix=None, inverse=None, volume=box.volume
    )


_EMPTY_DOMAIN_VOLUME = 0.0


def _build_domain(
    regions: Sequence[Region], chosen: Sequence[Slab], box: Box
) -> Optional[_SamplingDomain]:
    """Sampling parallelepiped for one subset of clipping slabs.

    Returns None when the subset is (near-)dependent; returns a zero-volume
    domain when the slab cell provably misses the intersection.
    """
    n = regions[0].n
    centre = box.centre
    radius = box.circumradius

    rows = [s.normal for s in chosen]
    lows = []
    highs = []
    for s in chosen:
        ball_lo = float(s.normal @ centre) - radius
        ball_hi = float(s.normal @ centre) + radius
        lows.append(max(s.offset - s.half_thickness, ball_lo))
        highs.append(min(s.offset + s.half_thickness, ball_hi))
        if highs[-1] <= lows[-1]:
            return _SamplingDomain(box.lo, box.hi, None, None, 0.0)

    vertical_range = None
    if len(chosen) == n - 1 and all(s.normal[-1] == 0.0 for s in chosen):
        # The chosen normals span the horizontal subspace, so the slab cell
        # pins the horizontal position; the radial equation of each region
        # then bounds the vertical coordinate over the cell, which is far
        # tighter than the box height when the cell is small.
        horiz = np.array([s.normal[:-1] for s in chosen])
        if abs(float(np.linalg.det(horiz))) < 1e-9:
            return None
        inv_h = np.linalg.inv(horiz)
        corners = []
        for bits in range(1 << (n - 1)):
            coords = np.array(
                [highs[j] if bits >> j & 1 else lows[j] for j in range(n - 1)]
            )
            corners.append(inv_h @ coords)
        corners = np.array(corners)
        cell_centre = corners.mean(axis=0)
        cell_radius = float(np.sqrt(((corners - cell_centre) ** 2).sum(axis=1)).max())
        z_lo = box.lo[-1]
        z_hi = box.hi[-1]
        for r in regions:
            x = r.sphere.centre
            rho_min = max(
                0.0,
                float(np.linalg.norm(x[:-1] - cell_centre)) - cell_radius,
            )
            zb_sq = (r.sphere.radius + r.delta) ** 2 - rho_min * rho_min
            if zb_sq <= 0.0:
                return _SamplingDomain(box.lo, box.hi, None, None, 0.0)
            zb = math.sqrt(zb_sq)
            z_lo = max(z_lo, x[-1] - zb)
            z_hi = min(z_hi, x[-1] + zb)
        vertical_range = (z_lo, z_hi)

    if len(chosen) < n:
        if vertical_range is not None:
            # Complement of a full horizontal span is the vertical axis.
            rows.append(np.eye(n)[-1])
            lows.append(vertical_range[0])
            highs.append(vertical_range[1])
        else:
            basis = _np_rows(rows)
            _, _, vh = np.linalg.svd(basis)
            for v in vh[len(chosen) :]:
                rows.append(v)
                lows.append(float(v @ centre) - radius)
                highs.append(float(v @ centre) + radius)

    lows = np.asarray(lows)
    highs = np.asarray(highs)
    if np.any(highs <= lows):
        return _SamplingDomain(lows, highs, None, None, 0.0)
    matrix = np.array(rows)
    jac = abs(float(np.linalg.det(matrix)))
    if jac < 1e-9:
        return None
    volume = float(np.prod(highs - lows)) / jac
    return _SamplingDomain(
        lows=lows,
        highs=highs,
        matrix=matrix,
        inverse=np.linalg.inv(matrix),
        volume=volume,
    )


def _np_rows(rows: list) -> np.ndarray:
    return np.array([np.asarray(r, dtype=np.float64) for r in rows])


def _clipped_domain(regions: Sequence[Region]) -> _SamplingDomain:
    """Bounding box of the regions clipped by pairwise slabs.

    Containment of the intersection is guaranteed by the slab construction,
    so restricting the sampling domain this way raises the hit rate without
    biasing the estimate.  Among the small subsets of available slabs the
    one giving the least domain volume is used.
    """
    n = regions[0].n
    box = intersect_boxes([region_box(r) for r in regions])
    if box.empty:
        return _SamplingDomain(box.lo, box.hi, None, None, 0.0)

    slabs = []
    for i in range(len(regions)):
        for j in range(i + 1, len(regions)):
            slab = _pair_slab(regions[i], regions[j])
            if slab is not None:
                slabs.append(slab)
    slabs.sort(key=lambda s: s.half_thickness)
    slabs = slabs[:10]
    if not slabs:
        return _box_domain(box)

    best = _box_domain(box)
    for size in range(1, min(n, len(slabs)) + 1):
        for subset in itertools.combinations(slabs, size):
            domain = _build_domain(regions, subset, box)
            if domain is None:
                continue
            if domain.empty:
                return domain
            if domain.volume < best.volume:
                best = domain
    return best


def mc_volume(
    regions: Sequence[Region],
    samples: int,
    seed: int,
    box: Optional[Box] = None,
) -> VolumeEstimate:
    """Monte-Carlo estimate of the volume of an intersection of regions.

    Samples uniformly over the bounding box of the regions clipped by all
    pairwise slabs (or over ``box`` when supplied, which must contain the
    intersection).  Sampling is chunked; chunk ``i`` draws from the
    substream ``(seed, i)`` and chunk results merge associatively, so equal
    seeds give bit-identical estimates.
    """
    if not regions:
        raise ValueError("need at least one region")
    samples = int(samples)
    if samples <= 0:
        raise ValueError("samples must be positive")
    n = regions[0].n
    if any(r.n != n for r in regions):
        raise ValueError("regions must share a dimension")

    domain = _box_domain(box) if box is not None else _clipped_domain(regions)
    if domain.empty:
        return VolumeEstimate(0.0, 0.0, samples, 0, VolumeMethod.MONTE_CARLO, 0.0)

    hits = 0
    done = 0
    chunk_index = 0
    while done < samples:
        count = min(MC_CHUNK, samples - done)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk_index,)))
        pts = domain.sample(rng, count)
        mask = region_masks(pts, regions[0])
        for region in regions[1:]:
            mask &= region_masks(pts, region)
        hits += int(np.count_nonzero(mask))
        done += count
        chunk_index += 1

    vol = domain.volume
    p = hits / samples
    value = vol * p
    if 0 < hits < samples:
        std_error = vol * math.sqrt(p * (1.0 - p) / samples)
    else:
        std_error = vol / samples
    return VolumeEstimate(value, std_error, samples, hits, VolumeMethod.MONTE_CARLO, vol)


def _grid_surface_proxy(regions: Sequence[Region], h: float) -> float:
    """Discretisation error proxy: h times a bound on the boundary surface.

    The boundary of the intersection lies in the union of the region
    boundaries, each bounded by twice the outer sphere area.
    """
    n = regions[0].n
    total = 0.0
    for r in regions:
        total += 2.0 * sphere_surface_area(n, r.sphere.radius + r.delta)
    return h * total


def grid_volume(regions: Sequence[Region], resolution: float) -> VolumeEstimate:
    """Voxel-grid volume oracle: h^n times the count of passing cell centres.

    The grid is anchored at the lower corner of the intersected bounding
    boxes, with cell-centre sampling (unbiased up to O(h * surface area)).
    Candidate cells along the vertical axis are pre-selected from the first
    region's radial equation with a one-cell safety margin and then tested
    exactly, so the count equals the full-grid sweep.

    Requires ``h <= delta/4`` for every region.
    """
    if not regions:
        raise ValueError("need at least one region")
    h = float(resolution)
    if h <= 0.0:
        raise ValueError("resolution must be positive")
    dmin = min(r.delta for r in regions)
    if h > dmin / 4.0 * (1.0 + 1e-12):
        raise ValueError("resolution too coarse: grid_volume requires h <= delta/4")
    n = regions[0].n
    if any(r.n != n for r in regions):
        raise ValueError("regions must share a dimension")

    box = intersect_boxes([region_box(r) for r in regions])
    if box.empty:
        return VolumeEstimate(0.0, 0.0, 0, 0, VolumeMethod.GRID, 0.0)
    lo, hi = box.lo, box.hi
    counts = np.maximum(np.ceil((hi - lo) / h).astype(np.int64), 1)

    first = regions[0]
    x0 = first.sphere.centre
    outer = first.sphere.radius + first.delta
    inner = max(first.sphere.radius - first.delta, 0.0)
    mz = int(counts[-1])
    z_lo = lo[-1]
    z_centre = x0[-1]

    total_cols = int(np.prod(counts[:-1]))
    col_shape = tuple(int(c) for c in counts[:-1])
    hits = 0
    evaluated = 0
    col_chunk = 1 << 16

    for start in range(0, total_cols, col_chunk):
        stop = min(start + col_chunk, total_cols)
        flat = np.arange(start, stop)
        axis_idx = np.unravel_index(flat, col_shape)
        coords_h = np.empty((stop - start, n - 1))
        for a in range(n - 1):
            coords_h[:, a] = lo[a] + (axis_idx[a] + 0.5) * h
        sq = np.zeros(stop - start)
        for a in range(n - 1):
            d = coords_h[:, a] - x0[a]
            sq += d * d

        out_sq = outer * outer - sq
        feasible = out_sq > 0.0
        if not np.any(feasible):
            continue
        so = np.sqrt(np.where(feasible, out_sq, 0.0))
        in_sq = inner * inner - sq
        si = np.sqrt(np.clip(in_sq, 0.0, None))
        split = feasible & (si > 2.0 * h)

        # Interval 1: [zc - so, zc - si] when split else [zc - so, zc + so].
        lo1 = z_centre - so
        hi1 = np.where(split, z_centre - si, z_centre + so)
        # Interval 2: [zc + si, zc + so] when split, empty otherwise.
        lo2 = np.where(split, z_centre + si, 1.0)
        hi2 = np.where(split, z_centre + so, 0.0)

        batch_cols = []
        batch_ks = []
        for a_lo, a_hi, valid in (
            (lo1, hi1, feasible),
            (lo2, hi2, split),
        ):
            klo = np.floor((a_lo - z_lo) / h - 0.5).astype(np.int64) - 1
            khi = np.ceil((a_hi - z_lo) / h - 0.5).astype(np.int64) + 1
            klo = np.clip(klo, 0, mz - 1)
            khi = np.clip(khi, 0, mz - 1)
            reps = np.where(valid, np.maximum(khi - klo + 1, 0), 0)
            total = int(reps.sum())
            if total == 0:
                continue
            col_rep = np.repeat(np.arange(stop - start), reps)
            starts = np.concatenate(([0], np.cumsum(reps)[:-1]))
            offsets = np.arange(total) - np.repeat(starts, reps)
            batch_cols.append(col_rep)
            batch_ks.append(np.repeat(klo, reps) + offsets)
        if not batch_cols:
            continue
        col_rep = np.concatenate(batch_cols)
        k_flat = np.concatenate(batch_ks)

        pts = np.empty((col_rep.shape[0], n))
        pts[:, : n - 1] = coords_h[col_rep]
        pts[:, n - 1] = z_lo + (k_flat + 0.5) * h
        mask = region_masks(pts, regions[0])
        for region in regions[1:]:
            mask &= region_masks(pts, region)
        hits += int(np.count_nonzero(mask))
        evaluated += pts.shape[0]

    value = hits * h**n
    return VolumeEstimate(
        value,
        _grid_surface_proxy(regions, h),
        evaluated,
        hits,
        VolumeMethod.GRID,
        box.volume,
    )


def _clip_polygon(poly: list, normal: np.ndarray, bound: float) -> list:
    """Sutherland-Hodgman clip of a convex polygon by <normal, y> <= bound."""
    out: list = []
    m = len(poly)
    for i in range(m):
        cur = poly[i]
        nxt = poly[(i + 1) % m]
        c_in = float(normal @ cur) <= bound
        n_in = float(normal @ nxt) <= bound
        if c_in:
            out.append(cur)
        if c_in != n_in:
            d_cur = float(normal @ cur) - bound
            d_nxt = float(normal @ nxt) - bound
            t = d_cur / (d_cur - d_nxt)
            out.append(cur + t * (nxt - cur))
    return out


def _polygon_area(poly: list) -> float:
    if len(poly) < 3:
        return 0.0
    area = 0.0
    for i in range(len(poly)):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % len(poly)]
        area += x1 * y2 - x2 * y1
    return abs(area) / 2.0


def parallelepiped_volume(slabs: Sequence[Slab], box: Box) -> float:
    """Volume of the intersection of slabs with an axis-aligned box.

    With independent normals ``u_j`` and half-thicknesses ``w_j`` the
    unclipped intersection of ``d`` slabs in dimension ``d`` is a
    parallelepiped of volume ``prod(2 w_j) / |u_1 ^ ... ^ u_d|`` (the change
    of variables to slab coordinates has that Jacobian); this exact value is
    returned whenever the parallelepiped sits inside the box.  Otherwise the
    box clip is computed exactly in dimensions one and two and by a
    fixed-seed Monte-Carlo sweep in higher dimensions.
    """
    if not slabs:
        raise ValueError("need at least one slab")
    d = box.n
    if any(s.n != d for s in slabs):
        raise ValueError("slab normals must match the box dimension")
    if len(slabs) > d:
        raise ValueError("more slabs than dimensions")
    normals = [s.normal for s in slabs]
    _orthonormalise(normals)  # raises DependentBasisError on dependent input
    if box.empty:
        return 0.0

    if d == 1:
        (s,) = slabs
        lo = max(box.lo[0], s.offset - s.half_thickness)
        hi = min(box.hi[0], s.offset + s.half_thickness)
        return max(hi - lo, 0.0)

    if d == 2:
        poly = [
            np.array([box.lo[0], box.lo[1]]),
            np.array([box.hi[0], box.lo[1]]),
            np.array([box.hi[0], box.hi[1]]),
            np.array([box.lo[0], box.hi[1]]),
        ]
        for s in slabs:
            poly = _clip_polygon(poly, s.normal, s.offset + s.half_thickness)
            poly = _clip_polygon(poly, -s.normal, -(s.offset - s.half_thickness))
            if not poly:
                return 0.0
        return _polygon_area(poly)

    if len(slabs) == d:
        mat = np.array(normals)
        inv = np.linalg.inv(mat)
        corners = []
        for bits in range(1 << d):
            coords = np.array(
                [
                    s.offset + (s.half_thickness if bits >> j & 1 else -s.half_thickness)
                    for j, s in enumerate(slabs)
                ]
            )
            corners.append(inv @ coords)
        corners = np.array(corners)
        if np.all(corners >= box.lo) and np.all(corners <= box.hi):
            widths = 1.0
            for s in slabs:
                widths *= 2.0 * s.half_thickness
            return widths / wedge_norm(normals)

    # Box clip in dimension >= 3: deterministic Monte-Carlo fallback.
    samples = 1 << 18
    rng = np.random.default_rng(np.random.SeedSequence(0))
    pts = box.lo + rng.random((samples, d)) * (box.hi - box.lo)
    pts = np.ascontiguousarray(pts)
    mask = np.ones(samples, dtype=bool)
    for s in slabs:
        mask &= kernels.slab_mask(
            pts, np.ascontiguousarray(s.normal), s.offset, s.half_thickness
        )
    return box.volume * int(np.count_nonzero(mask)) / samples


def predicted_tuple_bound(
    m: int,
    delta: float,
    t_list: Sequence[float],
    theta_list: Sequence[float],
) -> BoundPrediction:
    """Closed-form tuple intersection bound ``delta^m / (prod t prod theta)``.

    ``t_list`` carries ``t_2 .. t_m`` and ``theta_list`` carries
    ``theta_3 .. theta_m``; parameters must satisfy ``delta <= t_j <= 1`` and
    ``delta/t_j <= theta_j <= 1``.
    """
    m = int(m)
    delta = float(delta)
    if m < 2:
        raise ValueError("m must be at least 2")
    if not (0.0 < delta < 0.5):
        raise ValueError("delta must lie in (0, 1/2)")
    t_list = tuple(float(t) for t in t_list)
    theta_list = tuple(float(t) for t in theta_list)
    if len(t_list) != m - 1:
        raise ValueError("t_list must carry t_2 .. t_m")
    if len(theta_list) != m - 2:
        raise ValueError("theta_list must carry theta_3 .. theta_m")
    for t in t_list:
        if not (delta <= t <= 1.0):
            raise ValueError(f"t value {t} outside [delta, 1]")
    for t, theta in zip(t_list[1:], theta_list):
        if not (delta / t <= theta <= 1.0):
            raise ValueError(f"theta value {theta} outside [delta/t, 1]")
    denom = 1.0
    for t in t_list:
        denom *= t
    for theta in theta_list:
        denom *= theta
    value = delta**m / denom
    return BoundPrediction(m, delta, t_list, theta_list, value)
