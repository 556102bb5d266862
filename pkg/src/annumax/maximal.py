"""Discretised maximal averages over annuli and polar caps.

Evaluates ``sup_r`` of region averages of non-negative test functions on a
radius grid, together with the norms and functionals the scaling
experiments probe: grid Lebesgue norms, the sliced critical-exponent norm
over the horizontal window, the multiplicity functional of a sphere family
and the small-ball focusing ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import _kernels as kernels
from .families import SphereFamily
from .geometry import Region, RegionKind, Sphere, slice_cube_side
from .volume import (
    Box,
    region_box,
    region_masks,
    region_volume_analytic,
    unit_ball_volume,
)

__all__ = [
    "ConstantField",
    "BallIndicator",
    "AnnulusIndicator",
    "HalfSpaceIndicator",
    "VoxelGrid",
    "save_voxel_grid",
    "load_voxel_grid",
    "MaxProbeConfig",
    "sample_region",
    "region_average",
    "eval_max",
    "lp_norm",
    "sliced_max_norm",
    "MultiplicityEstimate",
    "multiplicity_functional",
    "FocusingResult",
    "focusing_probe",
]

_MC_CHUNK = 1 << 19


@dataclass(frozen=True)
class ConstantField:
    """Constant non-negative field; averages are exact."""

    value: float

    def __post_init__(self):
        if not (self.value >= 0.0 and math.isfinite(self.value)):
            raise ValueError("constant must be finite and non-negative")

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return np.full(points.shape[0], self.value)


@dataclass(frozen=True)
class BallIndicator:
    """Indicator of an open ball."""

    centre: np.ndarray
    radius: float

    def __post_init__(self):
        centre = np.asarray(self.centre, dtype=np.float64)
        centre.flags.writeable = False
        object.__setattr__(self, "centre", centre)
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0.0:
            raise ValueError("ball radius must be positive")

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        d = points - self.centre
        return (np.sqrt((d * d).sum(axis=1)) < self.radius).astype(np.float64)


@dataclass(frozen=True)
class AnnulusIndicator:
    """Indicator of a thickness-``delta`` annulus."""

    sphere: Sphere
    delta: float

    @property
    def region(self) -> Region:
        return Region(self.sphere, self.delta, RegionKind.ANNULUS)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return region_masks(points, self.region).astype(np.float64)


@dataclass(frozen=True)
class HalfSpaceIndicator:
    """Indicator of the open half-space ``<normal, y> > offset``."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        normal = np.asarray(self.normal, dtype=np.float64)
        normal = normal / np.linalg.norm(normal)
        normal.flags.writeable = False
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "offset", float(self.offset))

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return (points @ self.normal > self.offset).astype(np.float64)


@dataclass(frozen=True)
class VoxelGrid:
    """Non-negative samples on a regular grid; nearest-cell evaluation."""

    origin: np.ndarray
    spacing: float
    values: np.ndarray

    def __post_init__(self):
        origin = np.asarray(self.origin, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        if origin.ndim != 1 or values.ndim != origin.shape[0]:
            raise ValueError("origin length must equal the grid dimension")
        if not self.spacing > 0.0:
            raise ValueError("spacing must be positive")
        if not np.all(np.isfinite(values)) or np.any(values < 0.0):
            raise ValueError("voxel values must be finite and non-negative")
        origin.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "spacing", float(self.spacing))

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        idx = np.floor((points - self.origin) / self.spacing).astype(np.int64)
        inside = np.ones(points.shape[0], dtype=bool)
        for a, extent in enumerate(self.values.shape):
            inside &= (idx[:, a] >= 0) & (idx[:, a] < extent)
        out = np.zeros(points.shape[0])
        if np.any(inside):
            sel = tuple(idx[inside, a] for a in range(idx.shape[1]))
            out[inside] = self.values[sel]
        return out


def save_voxel_grid(grid: VoxelGrid, path) -> None:
    """Plain-text voxel format: dimension, origin, spacing, extents, values."""
    lines = [str(grid.origin.shape[0])]
    lines.append(" ".join(f"{v:.17g}" for v in grid.origin))
    lines.append(f"{grid.spacing:.17g}")
    lines.append(" ".join(str(e) for e in grid.values.shape))
    flat = grid.values.ravel(order="C")
    for start in range(0, flat.shape[0], 8):
        lines.append(" ".join(f"{v:.17g}" for v in flat[start : start + 8]))
    Path(path).write_text("\n".join(lines) + "\n")


def load_voxel_grid(path) -> VoxelGrid:
    tokens = Path(path).read_text().split()
    d = int(tokens[0])
    origin = np.array([float(t) for t in tokens[1 : 1 + d]])
    spacing = float(tokens[1 + d])
    extents = tuple(int(t) for t in tokens[2 + d : 2 + 2 * d])
    count = int(np.prod(extents))
    values = np.array([float(t) for t in tokens[2 + 2 * d : 2 + 2 * d + count]])
    return VoxelGrid(origin=origin, spacing=spacing, values=values.reshape(extents))


@dataclass(frozen=True)
class MaxProbeConfig:
    """Parameters of a maximal-average probe.

    ``radius_step`` defaults to ``delta/2``: annuli of thickness ``delta``
    at radii ``delta/2`` apart overlap in a fixed-proportion sub-annulus, so
    the maximum over this grid is comparable to the supremum over all radii
    in the range with an absolute constant.  ``cap_count`` is the
    informational number of rotated caps needed to cover a sphere in the
    reduction from full annuli to polar caps; nothing computed here depends
    on it and no particular value is asserted.
    """

    n: int
    delta: float
    p: float
    radius_step: Optional[float] = None
    radius_range: tuple = (1.0, 2.0)
    samples: int = 4096
    cap_count: Optional[int] = None

    def __post_init__(self):
        if not (0.0 < self.delta < 0.5):
            raise ValueError("delta must lie in (0, 1/2)")
        if self.p < 1.0:
            raise ValueError("p must be at least 1")
        if self.radius_step is not None and self.radius_step > self.delta / 2.0:
            raise ValueError("radius_step must not exceed delta/2")
        if self.samples < 1:
            raise ValueError("samples must be positive")

    @property
    def step(self) -> float:
        return self.radius_step if self.radius_step is not None else self.delta / 2.0

    @property
    def critical_exponent(self) -> float:
        return self.n / (self.n - 1.0)

    def radii(self) -> np.ndarray:
        lo, hi = self.radius_range
        count = int(math.floor((hi - lo) / self.step + 1e-9)) + 1
        return lo + np.arange(count) * self.step


def _sample_directions(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    g = rng.standard_normal((count, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _sample_cap_directions(
    rng: np.random.Generator, count: int, n: int, min_cos: float
) -> np.ndarray:
    """Uniform directions on the spherical cap with vertical cosine > min_cos."""
    if n == 2:
        alpha = math.acos(min_cos)
        phi = rng.uniform(-alpha, alpha, size=count)
        return np.column_stack([np.sin(phi), np.cos(phi)])
    if n == 3:
        # Vertical coordinate is uniform on a sphere (Archimedes).
        z = rng.uniform(min_cos, 1.0, size=count)
    else:
        # Rejection from a uniform envelope; the density (1-z^2)^((n-3)/2)
        # is decreasing on the cap, hence bounded by its value at min_cos.
        z = np.empty(count)
        top = (1.0 - min_cos * min_cos) ** ((n - 3) / 2.0)
        filled = 0
        while filled < count:
            cand = rng.uniform(min_cos, 1.0, size=count - filled)
            accept = rng.random(count - filled) * top <= (1.0 - cand * cand) ** (
                (n - 3) / 2.0
            )
            kept = cand[accept]
            z[filled : filled + kept.shape[0]] = kept
            filled += kept.shape[0]
    horiz = _sample_directions(rng, count, n - 1)
    out = np.empty((count, n))
    out[:, : n - 1] = horiz * np.sqrt(1.0 - z * z)[:, None]
    out[:, n - 1] = z
    return out


def sample_region(region: Region, rng: np.random.Generator, count: int) -> np.ndarray:
    """Exactly uniform samples inside an annulus or polar cap.

    Radial and angular coordinates separate: the radius has density
    proportional to ``rho^{n-1}`` on the shell and the direction is uniform
    on the sphere (or on the cap).
    """
    n = region.n
    r = region.sphere.radius
    d = region.delta
    a = max(r - d, 0.0)
    b = r + d
    u = rng.random(count)
    rho = (u * (b**n - a**n) + a**n) ** (1.0 / n)
    if region.kind is RegionKind.POLAR_CAP:
        dirs = _sample_cap_directions(rng, count, n, region.min_cos)
    else:
        dirs = _sample_directions(rng, count, n)
    return region.sphere.centre + rho[:, None] * dirs


def _ball_volume(n: int, radius: float) -> float:
    return unit_ball_volume(n) * radius**n


def _sample_ball(
    centre: np.ndarray, radius: float, rng: np.random.Generator, count: int
) -> np.ndarray:
    n = centre.shape[0]
    dirs = _sample_directions(rng, count, n)
    rho = radius * rng.random(count) ** (1.0 / n)
    return centre + rho[:, None] * dirs


def _region_average_stats(f, region: Region, samples: int, seed_seq) -> tuple:
    """Monte-Carlo average of ``f`` over a region, with its standard error."""
    if isinstance(f, ConstantField):
        return f.value, 0.0
    rng = np.random.default_rng(seed_seq)
    if isinstance(f, BallIndicator):
        ball_vol = _ball_volume(region.n, f.radius)
        region_vol = region_volume_analytic(region)
        if ball_vol < region_vol:
            # Exchange domains: average of the ball indicator over the
            # region equals |ball & region| / |region|, estimated from the
            # hit fraction of uniform ball samples (both volumes are exact).
            pts = _sample_ball(f.centre, f.radius, rng, samples)
            hits = int(np.count_nonzero(region_masks(pts, region)))
            p = hits / samples
            scale = ball_vol / region_vol
            if 0 < hits < samples:
                err = scale * math.sqrt(p * (1.0 - p) / samples)
            else:
                err = scale / samples
            return p * scale, err
    pts = sample_region(region, rng, samples)
    vals = f.evaluate(pts)
    mean = float(vals.mean())
    err = float(vals.std()) / math.sqrt(samples)
    return mean, err


def region_average(f, region: Region, samples: int, seed: int) -> float:
    """Average of ``f`` over the region: ``(1/|R|) * integral_R f``.

    Exact for constant fields, Monte-Carlo otherwise; deterministic for a
    fixed seed.
    """
    if samples < 1:
        raise ValueError("samples must be positive")
    value, _ = _region_average_stats(f, region, samples, np.random.SeedSequence(seed))
    return value


def _support_distance_interval(f, x: np.ndarray) -> Optional[tuple]:
    """Range of ``|y - x|`` over the support of ``f``, when cheaply known."""
    if isinstance(f, BallIndicator):
        d = float(np.linalg.norm(f.centre - x))
        return max(d - f.radius, 0.0), d + f.radius
    if isinstance(f, AnnulusIndicator):
        d = float(np.linalg.norm(f.sphere.centre - x))
        outer = f.sphere.radius + f.delta
        inner = max(f.sphere.radius - f.delta, 0.0)
        return max(d - outer, inner - d, 0.0), d + outer
    return None


def _eval_max_stats(
    f,
    x,
    cfg: MaxProbeConfig,
    variant: RegionKind,
    seed: int,
    x_index: int = 0,
) -> tuple:
    x = np.asarray(x, dtype=np.float64)
    support = _support_distance_interval(f, x)
    best = 0.0
    best_err = 0.0
    for r_index, r in enumerate(cfg.radii()):
        if support is not None:
            lo, hi = support
            # The region only sees radial distances in (r - delta, r + delta);
            # if that misses the support of f the average is exactly zero.
            if hi <= r - cfg.delta or lo >= r + cfg.delta:
                continue
        region = Region(Sphere(centre=x, radius=float(r)), cfg.delta, variant)
        value, err = _region_average_stats(
            f,
            region,
            cfg.samples,
            np.random.SeedSequence(seed, spawn_key=(x_index, r_index)),
        )
        if value > best:
            best = value
            best_err = err
    return best, best_err


def eval_max(
    f,
    x,
    cfg: MaxProbeConfig,
    variant: RegionKind = RegionKind.ANNULUS,
    seed: int = 0,
    x_index: int = 0,
) -> float:
    """Maximal region average over the radius grid ``{1, 1+step, ..., 2}``.

    Each (point, radius) pair draws from the substream
    ``(seed, x_index, r_index)``, so sweeps over many points are
    reproducible and embarrassingly parallel.
    """
    value, _ = _eval_max_stats(f, x, cfg, variant, seed, x_index)
    return value


def lp_norm(values: np.ndarray, p: float, spacing: float) -> float:
    """Grid Lebesgue norm ``(sum |v|^p h^d)^{1/p}``; d is the array rank."""
    if p < 1.0:
        raise ValueError("p must be at least 1")
    if spacing <= 0.0:
        raise ValueError("spacing must be positive")
    values = np.asarray(values, dtype=np.float64)
    d = values.ndim
    return float((np.abs(values) ** p).sum() * spacing**d) ** (1.0 / p)


def _slice_grid(n: int, spacing: float) -> tuple:
    side = slice_cube_side(n)
    g = max(int(math.ceil(side / spacing)), 1)
    h = side / g
    axis = -side / 2.0 + (np.arange(g) + 0.5) * h
    return axis, h


def sliced_max_norm(
    f, cfg: MaxProbeConfig, seed: int = 0, spacing=None, grid_offset=None
) -> float:
    """Critical-exponent norm of the polar-cap maximal average on the slice.

    Evaluates ``x -> eval_max(f, x, PolarCap)`` on a grid over
    ``Q^{n-1} x {0}`` with spacing at most ``delta`` and returns its
    ``L^{n/(n-1)}`` norm.  ``grid_offset`` shifts the evaluation grid by a
    horizontal vector (used by translation-invariance probes).
    """
    norm, _, _ = sliced_max_norm_detail(f, cfg, seed, spacing, grid_offset)
    return norm


def sliced_max_norm_detail(
    f, cfg: MaxProbeConfig, seed: int = 0, spacing=None, grid_offset=None
):
    """As ``sliced_max_norm`` but also returns an error proxy and the grid."""
    n = cfg.n
    spacing = cfg.delta if spacing is None else float(spacing)
    if spacing > cfg.delta * (1.0 + 1e-12):
        raise ValueError("slice grid spacing must not exceed delta")
    offset = np.zeros(n)
    if grid_offset is not None:
        offset[: n - 1] = np.asarray(grid_offset, dtype=np.float64)
    axis, h = _slice_grid(n, spacing)
    shape = (axis.shape[0],) * (n - 1)
    values = np.zeros(shape)
    errors = np.zeros(shape)
    for flat in range(values.size):
        idx = np.unravel_index(flat, shape)
        x = offset.copy()
        for a in range(n - 1):
            x[a] = x[a] + axis[idx[a]]
        value, err = _eval_max_stats(
            f, x, cfg, RegionKind.POLAR_CAP, seed, x_index=flat
        )
        values[idx] = value
        errors[idx] = err
    p = cfg.critical_exponent
    norm = lp_norm(values, p, h)
    if norm > 0.0:
        grad = norm ** (1.0 - p) * values ** (p - 1.0) * h ** (n - 1)
        err_proxy = float(np.sqrt(((grad * errors) ** 2).sum()))
    else:
        err_proxy = 0.0
    return norm, err_proxy, values


@dataclass(frozen=True)
class MultiplicityEstimate:
    """Monte-Carlo estimate of the n-th moment of the cap overlap count."""

    value: float
    std_error: float
    samples: int
    support_hits: int
    domain_volume: float


def multiplicity_functional(
    family: SphereFamily, samples: int = 200_000, seed: int = 0
) -> MultiplicityEstimate:
    """Estimate ``integral (sum_C chi_cap)^n`` over the family's caps.

    Equals the sum over ordered n-tuples of cap intersection volumes.
    Samples uniformly over the union bounding box of the caps and averages
    the n-th power of the per-point overlap count; chunk ``i`` draws from
    substream ``(seed, i)``.
    """
    if len(family) == 0:
        raise ValueError("family must be non-empty")
    if samples < 1:
        raise ValueError("samples must be positive")
    n = family.n
    boxes = [region_box(r) for r in family.regions(RegionKind.POLAR_CAP)]
    lo = np.min([b.lo for b in boxes], axis=0)
    hi = np.max([b.hi for b in boxes], axis=0)
    box = Box(lo, hi)
    centres = np.ascontiguousarray(family.centres)
    radii = np.ascontiguousarray(family.radii)
    min_cos = family.regions()[0].min_cos

    total = 0.0
    total_sq = 0.0
    support_hits = 0
    done = 0
    chunk_index = 0
    while done < samples:
        count = min(_MC_CHUNK, samples - done)
        rng = np.random.default_rng(
            np.random.SeedSequence(seed, spawn_key=(chunk_index,))
        )
        pts = np.ascontiguousarray(lo + rng.random((count, n)) * (hi - lo))
        overlap = kernels.cap_count(pts, centres, radii, family.delta, min_cos)
        w = overlap.astype(np.float64) ** n
        total += float(w.sum())
        total_sq += float((w * w).sum())
        support_hits += int(np.count_nonzero(overlap))
        done += count
        chunk_index += 1

    vol = box.volume
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    return MultiplicityEstimate(
        value=vol * mean,
        std_error=vol * math.sqrt(var / samples),
        samples=samples,
        support_hits=support_hits,
        domain_volume=vol,
    )


@dataclass(frozen=True)
class FocusingResult:
    """Operator-norm ratios for the small-ball input across a delta sweep."""

    p: float
    deltas: tuple
    ratios: tuple
    fitted_slope: float
    predicted_slope: float
    slope_std_error: float


def focusing_probe(
    cfg: MaxProbeConfig,
    deltas: Sequence[float],
    seed: int = 0,
    radial_count: int = 24,
) -> FocusingResult:
    """Ratio ``|max-average of small ball|_p / |ball|_p`` over a delta sweep.

    The input is the indicator of the ball of radius ``delta`` at the
    origin and the output norm is taken over the shell between the radius
    bounds.  The maximal average of this radial input is itself radial, so
    the shell norm reduces to a weighted radial grid sum.  The fitted slope
    of ``log ratio`` against ``log(1/delta)`` is compared with the focusing
    prediction ``n/p - (n-1)``.
    """
    from .experiments import fit_exponent

    n = cfg.n
    p = cfg.p
    r_lo, r_hi = cfg.radius_range
    ds = (r_hi - r_lo) / radial_count
    s_values = r_lo + (np.arange(radial_count) + 0.5) * ds
    surface = n * unit_ball_volume(n)

    ratios = []
    for di, delta in enumerate(deltas):
        cfg_d = MaxProbeConfig(
            n=n,
            delta=float(delta),
            p=p,
            radius_range=cfg.radius_range,
            samples=cfg.samples,
        )
        f = BallIndicator(centre=np.zeros(n), radius=float(delta))
        g = np.zeros(radial_count)
        for i, s in enumerate(s_values):
            x = np.zeros(n)
            x[0] = s
            g[i], _ = _eval_max_stats(
                f,
                x,
                cfg_d,
                RegionKind.ANNULUS,
                seed,
                x_index=di * radial_count + i,
            )
        norm_m = float(surface * ((g**p) * s_values ** (n - 1) * ds).sum()) ** (
            1.0 / p
        )
        norm_f = (unit_ball_volume(n) * float(delta) ** n) ** (1.0 / p)
        ratios.append(norm_m / norm_f)

    fit = fit_exponent(list(zip(deltas, ratios)))
    return FocusingResult(
        p=p,
        deltas=tuple(float(d) for d in deltas),
        ratios=tuple(ratios),
        fitted_slope=-fit.slope,
        predicted_slope=n / p - (n - 1.0),
        slope_std_error=fit.std_error,
    )
