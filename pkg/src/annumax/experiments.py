"""Experiment runners: delta sweeps, exponent fits and ratio audits.

Each experiment composes the geometry, volume, family and maximal-average
modules, emits one CSV of raw rows plus a human-readable summary, and
reports hard failures through a nonzero exit status.  Identical configs and
seeds produce byte-identical raw output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .families import (
    SphereFamily,
    bucket_audit,
    cardinality_audit,
    classify_tuple,
    collinear_triple,
    distance_bucket,
    angular_bucket,
    enemy_triple,
    family_capacity,
    generic_triple,
    random_family,
)
from .geometry import Region, RegionKind, Sphere
from .maximal import (
    AnnulusIndicator,
    MaxProbeConfig,
    eval_max,
    focusing_probe,
    lp_norm,
    multiplicity_functional,
    sliced_max_norm_detail,
)
from .volume import (
    intersect_boxes,
    mc_volume,
    predicted_tuple_bound,
    region_box,
    region_volume_analytic,
)

__all__ = [
    "ExperimentKind",
    "ExperimentConfig",
    "ExperimentResult",
    "FitResult",
    "fit_exponent",
    "exponent_a",
    "predicted_rhs",
    "run",
]


class ExperimentKind(Enum):
    ENEMY_SCAN = "enemy-scan"
    COLLINEAR_SCAN = "collinear-scan"
    GENERIC_SCAN = "generic-scan"
    TUPLE_BOUND = "tuple-bound"
    MULTIPLICITY = "multiplicity"
    CARDINALITY = "cardinality"
    BUCKET_AUDIT = "bucket-audit"
    MAXIMAL_NORM = "maximal-norm"
    FOCUSING_SWEEP = "focusing-sweep"


_DEFAULT_DELTAS = {
    ExperimentKind.ENEMY_SCAN: [2.0**-k for k in range(5, 12)],
    ExperimentKind.COLLINEAR_SCAN: [2.0**-k for k in range(5, 12)],
    ExperimentKind.GENERIC_SCAN: [2.0**-k for k in range(5, 12)],
    ExperimentKind.TUPLE_BOUND: [2.0**-k for k in range(5, 10)],
    ExperimentKind.MULTIPLICITY: [2.0**-k for k in range(4, 8)],
    ExperimentKind.CARDINALITY: [2.0**-k for k in range(4, 8)],
    ExperimentKind.BUCKET_AUDIT: [2.0**-5, 2.0**-6],
    ExperimentKind.MAXIMAL_NORM: [2.0**-4],
    ExperimentKind.FOCUSING_SWEEP: [2.0**-k for k in range(5, 10)],
}

_DEFAULT_SAMPLES = {
    ExperimentKind.ENEMY_SCAN: 1_000_000,
    ExperimentKind.COLLINEAR_SCAN: 1_000_000,
    ExperimentKind.GENERIC_SCAN: 1_000_000,
    ExperimentKind.TUPLE_BOUND: 50_000,
    ExperimentKind.MULTIPLICITY: 200_000,
    ExperimentKind.CARDINALITY: 10_000,
    ExperimentKind.BUCKET_AUDIT: 50_000,
    ExperimentKind.MAXIMAL_NORM: 10_000,
    ExperimentKind.FOCUSING_SWEEP: 10_000,
}

_TARGET_LAWS = {
    ExperimentKind.ENEMY_SCAN: (
        "triple annulus volume of a tangent-circle triple scales as delta^2.5"
    ),
    ExperimentKind.COLLINEAR_SCAN: (
        "triple annulus volume of a shared-circle triple scales as delta^2"
    ),
    ExperimentKind.GENERIC_SCAN: (
        "triple annulus volume of a transversal triple scales as delta^3"
    ),
    ExperimentKind.TUPLE_BOUND: (
        "polar-cap tuple volumes are dominated by delta^m/(prod t * prod theta) "
        "with a delta-stable constant"
    ),
    ExperimentKind.MULTIPLICITY: (
        "n-th moment of the cap overlap count is dominated by "
        "log(1/delta) * delta^(n-(n-1)^2) * family_size"
    ),
    ExperimentKind.CARDINALITY: (
        "dyadic class counts are dominated by theta^(n-j+1) t^(n-1) / delta^(n-1)"
    ),
    ExperimentKind.BUCKET_AUDIT: (
        "ordered tuples split into exactly one dyadic class each; "
        "coincident-class volume <= K * delta * family_size"
    ),
    ExperimentKind.MAXIMAL_NORM: (
        "critical-exponent norm of the polar-cap maximal average on the slice"
    ),
    ExperimentKind.FOCUSING_SWEEP: (
        "operator-norm ratio for a radius-delta ball input scales as "
        "(1/delta)^(n/p-(n-1))"
    ),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved description of one experiment run."""

    experiment: ExperimentKind
    n: int = 3
    deltas: Optional[tuple] = None
    seed: int = 0
    samples: Optional[int] = None
    out: Optional[Path] = None
    quiet: bool = False
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.experiment, ExperimentKind):
            object.__setattr__(self, "experiment", ExperimentKind(self.experiment))
        if self.n < 2:
            raise ValueError("dimension must be at least 2")
        if self.deltas is not None:
            deltas = tuple(float(d) for d in self.deltas)
            if not deltas:
                raise ValueError("delta list must be non-empty")
            for d in deltas:
                if not (0.0 < d < 0.5):
                    raise ValueError("each delta must lie in (0, 1/2)")
            object.__setattr__(self, "deltas", deltas)
        if self.samples is not None and self.samples < 10_000:
            raise ValueError("samples must be at least 10^4")
        if self.out is not None:
            object.__setattr__(self, "out", Path(self.out))

    def resolved_deltas(self) -> tuple:
        if self.deltas is not None:
            return self.deltas
        return tuple(_DEFAULT_DELTAS[self.experiment])

    def resolved_samples(self) -> int:
        if self.samples is not None:
            return self.samples
        return _DEFAULT_SAMPLES[self.experiment]

    def param_float(self, key: str, default: float) -> float:
        return float(self.params.get(key, default))

    def param_int(self, key: str, default: int) -> int:
        return int(self.params.get(key, default))

    def param_floats(self, key: str, default: Sequence[float]) -> tuple:
        raw = self.params.get(key)
        if raw is None:
            return tuple(float(v) for v in default)
        if isinstance(raw, (tuple, list)):
            return tuple(float(v) for v in raw)
        return tuple(float(tok) for tok in str(raw).replace(",", " ").split())


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list
    summary: dict
    failures: list
    warnings: list

    @property
    def passed(self) -> bool:
        return not self.failures


@dataclass(frozen=True)
class FitResult:
    """Least-squares scaling fit: log(value) against log(delta)."""

    slope: float
    intercept: float
    std_error: float
    points: tuple


def fit_exponent(points: Sequence) -> FitResult:
    """Ordinary least squares on the log-log cloud; slope is the exponent.

    Requires at least three points with positive values.
    """
    pts = [(float(d), float(v)) for d, v in points]
    if len(pts) < 3:
        raise ValueError("exponent fit requires at least three points")
    for d, v in pts:
        if d <= 0.0:
            raise ValueError("delta values must be positive")
        if v <= 0.0:
            raise ValueError("cannot fit a power law through a non-positive value")
    x = np.array([math.log(d) for d, _ in pts])
    y = np.array([math.log(v) for _, v in pts])
    xm = x.mean()
    ym = y.mean()
    sxx = float(((x - xm) ** 2).sum())
    slope = float(((x - xm) * (y - ym)).sum()) / sxx
    intercept = ym - slope * xm
    resid = y - (intercept + slope * x)
    if len(pts) > 2:
        std_error = math.sqrt(float((resid**2).sum()) / (len(pts) - 2) / sxx)
    else:
        std_error = 0.0
    logged = tuple((float(-xi), float(yi)) for xi, yi in zip(x, y))
    return FitResult(slope=slope, intercept=intercept, std_error=std_error, points=logged)


def exponent_a(m: int, n: int) -> int:
    """The tuple-sum exponent ``a(m, n) = m - (m-1)(n-1)``."""
    return m - (m - 1) * (n - 1)


def predicted_rhs(
    kind: str,
    n: int,
    m: int,
    delta: float,
    t_list: Optional[Sequence[float]],
    theta_list: Optional[Sequence[float]],
    family_size: int,
) -> float:
    """Closed-form right-hand sides used as audit denominators.

    ``kind='tuple_sum'`` gives ``delta^a(m,n) prod theta_j^{n-j}
    prod t_j^{n-2} * family_size``; ``kind='multiplicity'`` gives
    ``log(1/delta) * delta^{n-(n-1)^2} * family_size`` with the natural
    logarithm (constants are absorbed into the audited ratio).
    """
    if not (0.0 < delta < 0.5):
        raise ValueError("delta must lie in (0, 1/2)")
    if family_size < 1:
        raise ValueError("family_size must be positive")
    if kind == "multiplicity":
        return math.log(1.0 / delta) * delta ** (n - (n - 1) ** 2) * family_size
    if kind != "tuple_sum":
        raise ValueError(f"unknown predicted_rhs kind {kind!r}")
    if not 2 <= m <= n:
        raise ValueError("m must lie in [2, n]")
    t_list = tuple(float(t) for t in (t_list or ()))
    theta_list = tuple(float(t) for t in (theta_list or ()))
    if len(t_list) != m - 1 or len(theta_list) != m - 2:
        raise ValueError("need t_2..t_m and theta_3..theta_m")
    for t in t_list:
        if not delta <= t <= 1.0:
            raise ValueError("t outside [delta, 1]")
    value = float(delta) ** exponent_a(m, n) * family_size
    for t in t_list:
        value *= t ** (n - 2)
    for j, theta in enumerate(theta_list, start=3):
        if not delta / t_list[j - 2] <= theta <= 1.0:
            raise ValueError("theta outside [delta/t, 1]")
        value *= theta ** (n - j)
    return value


def _child_seeds(seed: int, count: int) -> list:
    state = np.random.SeedSequence(seed).generate_state(count, dtype=np.uint64)
    return [int(s) for s in state]


def _stability_violations(labels: Sequence[float], ks: Sequence[float]) -> list:
    """Stepwise constant-stability check: K at the next (halved) delta may
    grow by at most a factor of two.  Zero follows zero."""
    bad = []
    for i in range(len(ks) - 1):
        if ks[i + 1] <= 2.0 * ks[i]:
            continue
        bad.append(
            f"K({labels[i + 1]:g})={ks[i + 1]:.4g} exceeds 2*K({labels[i]:g})={ks[i]:.4g}"
        )
    return bad


def _triple_scan(cfg: ExperimentConfig, triple, with_caps: bool) -> ExperimentResult:
    deltas = cfg.resolved_deltas()
    samples = cfg.resolved_samples()
    seeds = _child_seeds(cfg.seed, 2 * len(deltas))
    rows = []
    failures: list[str] = []
    warnings: list[str] = []
    cap_ratios = []

    for di, delta in enumerate(deltas):
        ann = mc_volume(triple.regions(delta, RegionKind.ANNULUS), samples, seeds[2 * di])
        row = {
            "delta": delta,
            "annulus_volume": ann.value,
            "annulus_std_error": ann.std_error,
            "annulus_hits": ann.hits,
            "samples": samples,
        }
        if with_caps:
            cap = mc_volume(
                triple.regions(delta, RegionKind.POLAR_CAP), samples, seeds[2 * di + 1]
            )
            s1, s2, s3 = triple.spheres
            t2 = distance_bucket(s1, s2, delta)
            t3 = distance_bucket(s1, s3, delta)
            theta3 = None
            if t2 is not None and t3 is not None:
                theta3 = angular_bucket([s1, s2], s3, delta, t3)
            if t2 is None or t3 is None or theta3 is None:
                failures.append(f"triple degenerate at delta={delta:g}")
                continue
            pred = predicted_tuple_bound(3, delta, (t2, t3), (theta3,)).value
            ratio = cap.value / pred
            cap_ratios.append(ratio)
            row.update(
                {
                    "cap_volume": cap.value,
                    "cap_std_error": cap.std_error,
                    "cap_hits": cap.hits,
                    "t2": t2,
                    "t3": t3,
                    "theta3": theta3,
                    "predicted_bound": pred,
                    "cap_ratio": ratio,
                }
            )
        rows.append(row)

    target = triple.expected_exponent
    summary = {
        "experiment": cfg.experiment.value,
        "target_law": _TARGET_LAWS[cfg.experiment],
        "triple_kind": triple.kind.value,
        "expected_exponent": target,
    }
    values = [(r["delta"], r["annulus_volume"]) for r in rows]
    if any(v <= 0.0 for _, v in values):
        failures.append("triple annulus intersection registered no hits at some delta")
    else:
        fit = fit_exponent(values)
        summary["slope"] = fit.slope
        summary["slope_std_error"] = fit.std_error
        summary["slope_target"] = target
        summary["slope_band"] = 0.15
        if abs(fit.slope - target) > 0.15:
            failures.append(
                f"fitted exponent {fit.slope:.3f} outside {target}+-0.15"
            )
    if with_caps and cap_ratios:
        summary["cap_ratio_max"] = max(cap_ratios)
        bad = _stability_violations(list(deltas), cap_ratios)
        summary["cap_ratio_stable"] = not bad
        failures.extend("cap-bound stability: " + b for b in bad)
    for key, value in triple.certificate.items():
        summary[f"certificate_{key}"] = value
    return ExperimentResult(cfg, rows, summary, failures, warnings)


def _run_enemy_scan(cfg: ExperimentConfig) -> ExperimentResult:
    deltas = cfg.resolved_deltas()
    phi = cfg.param_float("phi", 0.0)
    centre2 = cfg.param_floats("centre2", (-0.3, 0.4))
    centre3 = cfg.param_floats("centre3", (0.2, -0.6))
    triple = enemy_triple(max(deltas), phi, centre2, centre3)
    return _triple_scan(cfg, triple, with_caps=True)


def _run_collinear_scan(cfg: ExperimentConfig) -> ExperimentResult:
    spacing = cfg.param_float("spacing", 0.5)
    plane_offset = cfg.param_float("plane_offset", 1.8)
    circle_radius = cfg.param_float("circle_radius", 0.8)
    triple = collinear_triple(spacing, plane_offset, circle_radius)
    return _triple_scan(cfg, triple, with_caps=False)


def _run_generic_scan(cfg: ExperimentConfig) -> ExperimentResult:
    triple = generic_triple(cfg.seed)
    return _triple_scan(cfg, triple, with_caps=False)


def _overlap_triples(family: SphereFamily, rng: np.random.Generator, want: int):
    """Ordered triples likely to have overlapping polar caps.

    Cap intersections are rare among random spheres, and the bound audit is
    only informative where the bound is active, so candidates are drawn in
    two rounds: triples of caps containing a common probe point (the cap
    midpoint of an anchor sphere), which saturate the bound when the centre
    spacing scales with the thickness, then triples with mutually
    overlapping cap bounding boxes.  Deterministic for a fixed generator
    state.
    """
    from . import _kernels as kernels

    size = len(family)
    delta = family.delta
    regions = family.regions(RegionKind.POLAR_CAP)
    boxes = [region_box(r) for r in regions]
    lo = np.array([b.lo for b in boxes])
    hi = np.array([b.hi for b in boxes])
    triples = []
    seen = set()

    # Round 1: concurrency anchors at self-similar centre spacing.
    probes = family.centres.copy()
    probes[:, -1] += family.radii
    probes = np.ascontiguousarray(probes)
    contain = np.zeros((size, size), dtype=bool)
    min_cos = regions[0].min_cos
    for i in range(size):
        contain[:, i] = kernels.cap_mask(
            probes,
            np.ascontiguousarray(family.centres[i]),
            float(family.radii[i]),
            delta,
            min_cos,
        )
    for a in rng.permutation(size):
        if len(triples) >= want // 2:
            break
        a = int(a)
        idxs = np.nonzero(contain[a])[0]
        d = np.linalg.norm(family.centres[idxs] - family.centres[a], axis=1)
        idxs = idxs[(d > 8.0 * delta) & (d <= 64.0 * delta)]
        if idxs.size < 2:
            continue
        jk = rng.choice(idxs, size=2, replace=False)
        key = (a, int(jk[0]), int(jk[1]))
        if key not in seen:
            seen.add(key)
            triples.append(key)

    # Round 2: bounding-box overlap triples.
    over = np.ones((size, size), dtype=bool)
    for a in range(lo.shape[1]):
        over &= (lo[:, None, a] < hi[None, :, a]) & (lo[None, :, a] < hi[:, None, a])
    np.fill_diagonal(over, False)
    pairs = np.argwhere(np.triu(over))
    if pairs.shape[0]:
        for idx in rng.permutation(pairs.shape[0]):
            if len(triples) >= want:
                break
            i, j = int(pairs[idx, 0]), int(pairs[idx, 1])
            l = np.maximum(lo[i], lo[j])
            h = np.minimum(hi[i], hi[j])
            ok = np.ones(size, dtype=bool)
            for a in range(lo.shape[1]):
                ok &= (lo[:, a] < h[a]) & (l[a] < hi[:, a])
            ok[i] = ok[j] = False
            ks = np.nonzero(ok)[0]
            if ks.size:
                key = (i, j, int(ks[int(rng.integers(ks.size))]))
                if key not in seen:
                    seen.add(key)
                    triples.append(key)
    return triples


def _run_tuple_bound(cfg: ExperimentConfig) -> ExperimentResult:
    deltas = cfg.resolved_deltas()
    samples = cfg.resolved_samples()
    n = cfg.n
    tuples_per_delta = cfg.param_int("tuples", 48)
    seeds = _child_seeds(cfg.seed, 2 * len(deltas))
    rows = []
    failures: list[str] = []
    warnings: list[str] = []
    k_values = []

    for di, delta in enumerate(deltas):
        capacity = family_capacity(n, delta)
        size = min(capacity, cfg.param_int("family_size", 512))
        family = random_family(n, delta, size, seeds[2 * di])
        rng = np.random.default_rng(np.random.SeedSequence(seeds[2 * di + 1]))
        spheres = family.spheres
        ratios = []
        degenerate = 0
        for i, j, k in _overlap_triples(family, rng, 4 * tuples_per_delta):
            if len(ratios) >= tuples_per_delta:
                break
            sig = classify_tuple([spheres[i], spheres[j], spheres[k]], delta)
            if sig is None or sig.J != (3,):
                degenerate += 1
                continue
            regions = [
                Region(spheres[idx], delta, RegionKind.POLAR_CAP) for idx in (i, j, k)
            ]
            est = mc_volume(regions, samples, int(rng.integers(2**62)))
            pred = predicted_tuple_bound(3, delta, sig.t, sig.theta).value
            ratio = est.value / pred
            ratios.append(ratio)
            rows.append(
                {
                    "delta": delta,
                    "i": i,
                    "j": j,
                    "k": k,
                    "t2": sig.t[0],
                    "t3": sig.t[1],
                    "theta3": sig.theta[0],
                    "cap_volume": est.value,
                    "cap_std_error": est.std_error,
                    "cap_hits": est.hits,
                    "predicted_bound": pred,
                    "ratio": ratio,
                }
            )
        if len(ratios) < 3:
            warnings.append(
                f"delta={delta:g}: only {len(ratios)} classified tuples "
                f"({degenerate} degenerate draws)"
            )
        k_values.append(max(ratios) if ratios else 0.0)

    summary = {
        "experiment": cfg.experiment.value,
        "target_law": _TARGET_LAWS[cfg.experiment],
    }
    for delta, k in zip(deltas, k_values):
        summary[f"K_delta_{delta:g}"] = k
    bad = _stability_violations(list(deltas), k_values)
    summary["K_stable"] = not bad
    failures.extend("tuple-bound stability: " + b for b in bad)
    return ExperimentResult(cfg, rows, summary, failures, warnings)


def _run_multiplicity(cfg: ExperimentConfig) -> ExperimentResult:
    deltas = cfg.resolved_deltas()
    samples = cfg.resolved_samples()
    n = cfg.n
    fraction = cfg.param_float("fraction", 1.0)
    seeds = _child_seeds(cfg.seed, 2 * len(deltas))
    rows = []
    failures: list[str] = []
    warnings: list[str] = []
    ratios = []

    for di, delta in enumerate(deltas):
        capacity = family_capacity(n, delta)
        size = max(2, int(round(fraction * capacity)))
        family = random_family(n, delta, size, seeds[2 * di])
        est = multiplicity_functional(family, samples=samples, seed=seeds[2 * di + 1])
        denominator = predicted_rhs("multiplicity", n, n, delta, None, None, size)
        ratio = est.value / denominator
        ratios.append(ratio)
        rows.append(
            {
                "delta": delta,
                "family_size": size,
                "value": est.value,
                "std_error": est.std_error,
                "support_hits": est.support_hits,
                "samples": samples,
                "denominator": denominator,
                "ratio": ratio,
            }
        )

    summary = {
        "experiment": cfg.experiment.value,
        "target_law": _TARGET_LAWS[cfg.experiment],
    }
    for delta, ratio in zip(deltas, ratios):
        summary[f"ratio_delta_{delta:g}"] = ratio
    if any(r <= 0.0 for r in ratios):
        failures.append("multiplicity functional registered no support hits")
    else:
        spread = max(ratios) / min(ratios)
        summary["ratio_max_over_min"] = spread
        summary["ratio_spread_bound"] = 4.0
        if spread > 4.0:
            failures.append(
                f"multiplicity ratio spread {spread:.2f} exceeds 4 across the sweep"
            )
    return ExperimentResult(cfg, rows, summary, failures, warnings)


def _run_cardinality(cfg: ExperimentConfig) -> ExperimentResult:
    deltas = cfg.resolved_deltas()
    n = cfg.n
    t = cfg.param_float("t", 0.25)
    theta = cfg.param_float("theta", 1.0)
    anchors = cfg.param_int("anchors", 12)
    fraction = cfg.param_float("fraction", 1.0)
    seeds = _child_seeds(cfg.seed, 2 * len(deltas))
    rows = []
    failures: list[str] = []
    warnings: list[str] = []
    k_bucket, k_shell, k_degen = [], [], []

    for di, delta in enumerate(deltas):
        capacity = family_capacity(n, delta)
        size = max(2, int(round(fraction * capacity)))
        family = random_family(n, delta, size, seeds[2 * di])
        rng = np.random.default_rng(np.random.SeedSequence(seeds[2 * di + 1]))
        centres = family.centres
        anchor_ids = rng.choice(size, size=min(anchors, size), replace=False)
        best_bucket = best_shell = best_degen = 0.0
        used = 0
        for a in anchor_ids:
            a = int(a)
            d = np.linalg.norm(centres - centres[a], axis=1)
            candidates = np.nonzero((d > t / 2.0) & (d <= t))[0]
            if candidates.size == 0:
                continue
            b = int(candidates[int(rng.integers(candidates.size))])
            report = cardinality_audit(
                family, [family.sphere(a), family.sphere(b)], t, theta
            )
            used += 1
            best_bucket = max(best_bucket, report.bucket_ratio)
            best_shell = max(best_shell, report.shell_ratio)
            best_degen = max(best_degen, report.degenerate_ratio)
            rows.append(
                {
                    "delta": delta,
                    "family_size": size,
                    "anchor": a,
                    "second": b,
                    "bucket_count": report.bucket_count,
                    "bucket_ratio": report.bucket_ratio,
                    "shell_count": report.shell_count,
                    "shell_ratio": report.shell_ratio,
                    "degenerate_count": report.degenerate_count,
                    "degenerate_ratio": report.degenerate_ratio,
                }
            )
        if used == 0:
            failures.append(f"delta={delta:g}: no anchor had a sphere in class t={t:g}")
            continue
        k_bucket.append(best_bucket)
        k_shell.append(best_shell)
        k_degen.append(best_degen)

    summary = {
        "experiment": cfg.experiment.value,
        "target_law": _TARGET_LAWS[cfg.experiment],
        "t": t,
        "theta": theta,
    }
    for name, ks in (("bucket", k_bucket), ("shell", k_shell), ("degenerate", k_degen)):
        for delta, k in zip(deltas, ks):
            summary[f"K_{name}_delta_{delta:g}"] = k
        bad = _stability_violations(list(deltas), ks)
        summary[f"K_{name}_stable"] = not bad
        failures.extend(f"cardinality {name} stability: " + b for b in bad)
    return ExperimentResult(cfg, rows, summary, failures, warnings)


def _coincident_volume_total(
    family: SphereFamily, samples: int, seed: int
) -> float:
    """Sum of cap intersection volumes over coincident-class ordered triples.

    Decomposes by the distinct support of each tuple: singletons contribute
    their exact cap volume, pairs contribute six ordered tuples each, and
    distinct triples containing a sub-2delta pair contribute six as well.
    Bounding-box prefilters keep the Monte-Carlo work to overlapping caps.
    """
    n = family.n
    delta = family.delta
    N = len(family)
    regions = family.regions(RegionKind.POLAR_CAP)
    boxes = [region_box(r) for r in regions]
    seeds = iter(_child_seeds(seed, N * N + 8 * N))

    total = sum(region_volume_analytic(r) for r in regions)

    pair_volume: dict[tuple, float] = {}

    def pair_vol(a: int, b: int) -> float:
        key = (min(a, b), max(a, b))
        if key not in pair_volume:
            if intersect_boxes([boxes[key[0]], boxes[key[1]]]).empty:
                pair_volume[key] = 0.0
            else:
                pair_volume[key] = mc_volume(
                    [regions[key[0]], regions[key[1]]], samples, next(seeds)
                ).value
        return pair_volume[key]

    for a in range(N):
        for b in range(a + 1, N):
            total += 6.0 * pair_vol(a, b)

    close_pairs = []
    centres = family.centres
    for a in range(N):
        d = np.linalg.norm(centres - centres[a], axis=1)
        for b in np.nonzero((d > 0.0) & (d < 2.0 * delta))[0]:
            if a < int(b):
                close_pairs.append((a, int(b)))

    seen = set()
    for a, b in close_pairs:
        for c in range(N):
            if c in (a, b):
                continue
            key = tuple(sorted((a, b, c)))
            if key in seen:
                continue
            seen.add(key)
            if pair_vol(a, b) == 0.0:
                continue
            if intersect_boxes([boxes[key[0]], boxes[key[1]], boxes[key[2]]]).empty:
                continue
            est = mc_volume([regions[i] for i in key], samples, next(seeds))
            total += 6.0 * est.value
    return total


def _run_bucket_audit(cfg: ExperimentConfig) -> ExperimentResult:
    deltas = cfg.resolved_deltas()
    samples = cfg.resolved_samples()
    n = cfg.n
    m = cfg.param_int("m", 3)
    size_param = cfg.param_int("family_size", 64)
    seeds = _child_seeds(cfg.seed, 2 * len(deltas))
    rows = []
    failures: list[str] = []
    warnings: list[str] = []
    k_base = []

    for di, delta in enumerate(deltas):
        size = min(size_param, family_capacity(n, delta))
        family = random_family(n, delta, size, seeds[2 * di])
        report = bucket_audit(family, m)
        if not report.partition_ok:
            failures.append(f"delta={delta:g}: tuple classes do not partition")
        if m == 3:
            coincident_volume = _coincident_volume_total(
                family, samples, seeds[2 * di + 1]
            )
        else:
            coincident_volume = float("nan")
        k = coincident_volume / (delta * size)
        k_base.append(k)
        rows.append(
            {
                "delta": delta,
                "family_size": size,
                "total_tuples": report.total_tuples,
                "classified_tuples": report.classified_tuples,
                "coincident_tuples": report.coincident_tuples,
                "distinct_buckets": len(report.bucket_counts),
                "partition_ok": report.partition_ok,
                "coincident_volume": coincident_volume,
                "K_base": k,
            }
        )

    summary = {
        "experiment": cfg.experiment.value,
        "target_law": _TARGET_LAWS[cfg.experiment],
        "partition_ok": all(r["partition_ok"] for r in rows),
    }
    for delta, k in zip(deltas, k_base):
        summary[f"K_base_delta_{delta:g}"] = k
    if m == 3 and len(k_base) > 1:
        bad = _stability_violations(list(deltas), k_base)
        summary["K_base_stable"] = not bad
        failures.extend("base-case stability: " + b for b in bad)
    return ExperimentResult(cfg, rows, summary, failures, warnings)


def _run_maximal_norm(cfg: ExperimentConfig) -> ExperimentResult:
    deltas = cfg.resolved_deltas()
    n = cfg.n
    field_radius = cfg.param_float("field_radius", 1.2)
    avg_samples = cfg.param_int("avg_samples", 2048)
    full_grid = cfg.param_int("full_grid", 6)
    seeds = _child_seeds(cfg.seed, 2 * len(deltas))
    rows = []
    failures: list[str] = []
    warnings: list[str] = []

    from .geometry import slice_cube_side

    for di, delta in enumerate(deltas):
        probe = MaxProbeConfig(n=n, delta=delta, p=n / (n - 1.0), samples=avg_samples)
        f = AnnulusIndicator(Sphere(centre=np.zeros(n), radius=field_radius), delta)
        sliced, err, values = sliced_max_norm_detail(f, probe, seed=seeds[2 * di])
        side = slice_cube_side(n)
        h = side / full_grid
        axis = -side / 2.0 + (np.arange(full_grid) + 0.5) * h
        full_values = np.zeros((full_grid,) * n)
        for flat in range(full_values.size):
            idx = np.unravel_index(flat, full_values.shape)
            x = np.array([axis[i] for i in idx])
            full_values[idx] = eval_max(
                f,
                x,
                probe,
                RegionKind.POLAR_CAP,
                seed=seeds[2 * di + 1],
                x_index=flat,
            )
        full_norm = lp_norm(full_values, probe.critical_exponent, h)
        rows.append(
            {
                "delta": delta,
                "sliced_norm": sliced,
                "sliced_norm_error": err,
                "full_domain_norm": full_norm,
                "grid_points_slice": values.size,
                "grid_points_full": full_values.size,
            }
        )
        if sliced <= 0.0:
            failures.append(f"delta={delta:g}: sliced norm vanished")

    summary = {
        "experiment": cfg.experiment.value,
        "target_law": _TARGET_LAWS[cfg.experiment],
        "field_radius": field_radius,
    }
    for row in rows:
        summary[f"sliced_norm_delta_{row['delta']:g}"] = row["sliced_norm"]
        summary[f"full_domain_norm_delta_{row['delta']:g}"] = row["full_domain_norm"]
    return ExperimentResult(cfg, rows, summary, failures, warnings)


def _run_focusing_sweep(cfg: ExperimentConfig) -> ExperimentResult:
    deltas = cfg.resolved_deltas()
    n = cfg.n
    p_values = cfg.param_floats("p", (1.2, 1.5, 2.0))
    avg_samples = cfg.param_int("avg_samples", 4096)
    radial_count = cfg.param_int("radial_count", 24)
    band = cfg.param_float("band", 0.15)
    rows = []
    failures: list[str] = []
    warnings: list[str] = []
    summary = {
        "experiment": cfg.experiment.value,
        "target_law": _TARGET_LAWS[cfg.experiment],
        "band": band,
    }

    for pi, p in enumerate(p_values):
        probe = MaxProbeConfig(n=n, delta=min(deltas), p=p, samples=avg_samples)
        result = focusing_probe(
            probe, deltas, seed=cfg.seed + pi, radial_count=radial_count
        )
        for delta, ratio in zip(result.deltas, result.ratios):
            rows.append({"p": p, "delta": delta, "ratio": ratio})
        summary[f"slope_p_{p:g}"] = result.fitted_slope
        summary[f"slope_target_p_{p:g}"] = result.predicted_slope
        if abs(result.fitted_slope - result.predicted_slope) > band:
            failures.append(
                f"p={p:g}: fitted slope {result.fitted_slope:.3f} outside "
                f"{result.predicted_slope:.3f}+-{band:g}"
            )
    return ExperimentResult(cfg, rows, summary, failures, warnings)


_RUNNERS = {
    ExperimentKind.ENEMY_SCAN: _run_enemy_scan,
    ExperimentKind.COLLINEAR_SCAN: _run_collinear_scan,
    ExperimentKind.GENERIC_SCAN: _run_generic_scan,
    ExperimentKind.TUPLE_BOUND: _run_tuple_bound,
    ExperimentKind.MULTIPLICITY: _run_multiplicity,
    ExperimentKind.CARDINALITY: _run_cardinality,
    ExperimentKind.BUCKET_AUDIT: _run_bucket_audit,
    ExperimentKind.MAXIMAL_NORM: _run_maximal_norm,
    ExperimentKind.FOCUSING_SWEEP: _run_focusing_sweep,
}


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(rows: list, path: Path) -> None:
    if not rows:
        path.write_text("")
        return
    header = list(rows[0].keys())
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_format_value(row[k]) for k in header))
    path.write_text("\n".join(lines) + "\n")


def _write_summary(result: ExperimentResult, path: Path) -> None:
    lines = []
    for key, value in result.summary.items():
        lines.append(f"{key} = {_format_value(value)}")
    for warning in result.warnings:
        lines.append(f"warning = {warning}")
    for failure in result.failures:
        lines.append(f"failure = {failure}")
    lines.append(f"passed = {_format_value(result.passed)}")
    path.write_text("\n".join(lines) + "\n")


def _write_config_echo(cfg: ExperimentConfig, path: Path) -> None:
    lines = [
        f"experiment = {cfg.experiment.value}",
        f"dim = {cfg.n}",
        "delta = " + " ".join(repr(d) for d in cfg.resolved_deltas()),
        f"seed = {cfg.seed}",
        f"samples = {cfg.resolved_samples()}",
        f"out = {cfg.out if cfg.out is not None else ''}",
        f"quiet = {_format_value(cfg.quiet)}",
    ]
    for key in sorted(cfg.params):
        lines.append(f"{key} = {cfg.params[key]}")
    path.write_text("\n".join(lines) + "\n")


def run(cfg: ExperimentConfig) -> ExperimentResult:
    """Execute an experiment and write raw.csv, summary.txt and config.echo."""
    runner = _RUNNERS[cfg.experiment]
    result = runner(cfg)
    if cfg.out is not None:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(result.rows, out / "raw.csv")
        _write_summary(result, out / "summary.txt")
        _write_config_echo(cfg, out / "config.echo")
    return result
