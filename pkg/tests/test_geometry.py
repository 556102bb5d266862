import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from annumax.geometry import (
    DegenerateDirectionError,
    DependentBasisError,
    Region,
    RegionKind,
    Slab,
    Sphere,
    centre_distance,
    polar_cap_min_cos,
    proj_orthocomplement,
    region_contains,
    restrict_to_slice,
    slab_of_pair,
    unit_direction,
    wedge_norm,
    wedge_norm_gram,
    wedge_norm_projection,
)


def sphere(centre, radius):
    return Sphere(centre=np.array(centre, dtype=float), radius=radius)


class TestCentreDistance:
    def test_axis_aligned(self):
        assert centre_distance(sphere((0, 0, 0), 1), sphere((1, 0, 0), 1.5)) == 1.0

    def test_three_four_five(self):
        assert centre_distance(sphere((0, 0, 0), 1), sphere((3, 4, 0), 1)) == 5.0

    def test_identical_centres(self):
        s = sphere((0.3, -0.2, 0), 1.2)
        assert centre_distance(s, s) == 0.0

    def test_symmetry(self):
        a = sphere((0.1, 0.5, 0), 1)
        b = sphere((-0.4, 0.2, 0), 2)
        assert centre_distance(a, b) == centre_distance(b, a)


class TestUnitDirection:
    def test_horizontal_pair(self):
        d = unit_direction(sphere((0, 0, 0), 1), sphere((2, 0, 0), 1))
        assert d.dist == 2.0
        assert np.allclose(d.e_full, [1, 0, 0])
        assert d.e_horiz is not None
        assert np.allclose(d.e_horiz, [1, 0])

    def test_off_slice_centre_has_no_horizontal_part(self):
        d = unit_direction(sphere((0, 0, 0), 1), sphere((0, 0, 1), 1))
        assert np.allclose(d.e_full, [0, 0, 1])
        assert d.e_horiz is None

    def test_coincident_centres_raise(self):
        s = sphere((0.2, 0.1, 0), 1)
        with pytest.raises(DegenerateDirectionError):
            unit_direction(s, sphere((0.2, 0.1, 0), 1.5))

    def test_antisymmetry_exact(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            a = sphere(rng.uniform(-1, 1, 3), 1.0)
            b = sphere(rng.uniform(-1, 1, 3), 1.0)
            ab = unit_direction(a, b).e_full
            ba = unit_direction(b, a).e_full
            assert np.array_equal(ab, -ba)


class TestRegionContains:
    def test_annulus_near_sphere(self):
        r = Region(sphere((0, 0, 0), 1), 0.01, RegionKind.ANNULUS)
        assert region_contains(r, [1.005, 0, 0])
        assert not region_contains(r, [1.02, 0, 0])
        assert not region_contains(r, [0.98, 0, 0])

    def test_polar_cap_rejects_equatorial_point(self):
        r = Region(sphere((0, 0, 0), 1), 0.01, RegionKind.POLAR_CAP)
        assert not region_contains(r, [1.005, 0, 0])

    def test_polar_cap_accepts_north_pole(self):
        r = Region(sphere((0, 0, 0), 1), 0.01, RegionKind.POLAR_CAP)
        assert region_contains(r, [0, 0, 1.005])

    def test_cap_threshold(self):
        assert polar_cap_min_cos(3) == 1.0 - 1.0 / 300.0

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_polar_cap_subset_of_annulus(self, seed):
        rng = np.random.default_rng(seed)
        centre = rng.uniform(-0.3, 0.3, 3)
        centre[2] = 0.0
        radius = rng.uniform(1, 2)
        delta = float(rng.uniform(0.005, 0.2))
        cap = Region(Sphere(centre=centre, radius=radius), delta, RegionKind.POLAR_CAP)
        ann = Region(Sphere(centre=centre, radius=radius), delta, RegionKind.ANNULUS)
        pts = centre + rng.uniform(-1.1 * (radius + delta), 1.1 * (radius + delta), (64, 3))
        for p in pts:
            if region_contains(cap, p):
                assert region_contains(ann, p)

    def test_cap_bounding_box_contains_cap_samples(self):
        from annumax.maximal import sample_region

        cap = Region(sphere((0.1, -0.2, 0), 1.7), 0.03, RegionKind.POLAR_CAP)
        lo, hi = cap.bounding_box()
        pts = sample_region(cap, np.random.default_rng(0), 2000)
        assert np.all(pts >= lo - 1e-12) and np.all(pts <= hi + 1e-12)


class TestSlabOfPair:
    def test_symmetric_pair_offset_and_thickness(self):
        a = sphere((0, 0, 0), 1)
        b = sphere((1, 0, 0), 1)
        slab = slab_of_pair(a, b, 0.01)
        assert np.allclose(slab.normal, [1, 0, 0])
        assert slab.offset == pytest.approx(0.5)
        # Offset-range calculation: ((r + rbar) * delta + delta^2) / dist.
        assert slab.half_thickness == pytest.approx(0.0201)

    def test_asymmetric_radii_offset(self):
        slab = slab_of_pair(sphere((0, 0, 0), 1.5), sphere((1, 0, 0), 1.0), 0.01)
        # (r^2 - rbar^2 - (|x|^2 - |xbar|^2)) / (2 dist) = (2.25 - 1 + 1) / 2.
        assert slab.offset == pytest.approx(1.125)

    def test_contained_samples_pass_slab_predicate(self):
        from annumax.volume import mc_volume, region_masks
        from annumax.volume import _clipped_domain

        a = Region(sphere((0, 0, 0), 1.3), 0.02, RegionKind.ANNULUS)
        b = Region(sphere((0.8, 0.1, 0), 1.1), 0.02, RegionKind.ANNULUS)
        slab = slab_of_pair(a.sphere, b.sphere, 0.02)
        domain = _clipped_domain([a, b])
        rng = np.random.default_rng(3)
        pts = domain.sample(rng, 200_000)
        inside = region_masks(pts, a) & region_masks(pts, b)
        assert inside.sum() > 1000
        for p in pts[inside][:5000]:
            assert slab.contains(p)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_thickness_scaling_identity(self, seed):
        rng = np.random.default_rng(seed)
        a = sphere(rng.uniform(-1, 1, 3), float(rng.uniform(0.5, 4)))
        b = sphere(rng.uniform(-1, 1, 3), float(rng.uniform(0.5, 4)))
        delta = float(rng.uniform(0.001, 0.2))
        if centre_distance(a, b) < 2 * delta:
            return
        slab = slab_of_pair(a, b, delta)
        bound = (a.radius + b.radius) * delta + delta * delta
        assert slab.half_thickness * centre_distance(a, b) <= bound * (1 + 1e-12)

    def test_coincident_centres_raise(self):
        s = sphere((0, 0, 0), 1)
        with pytest.raises(DegenerateDirectionError):
            slab_of_pair(s, sphere((0, 0, 0), 1.5), 0.01)

    def test_restrict_to_slice(self):
        slab = slab_of_pair(sphere((0, 0, 0), 1), sphere((0.6, 0.8, 0), 1.2), 0.01)
        flat = restrict_to_slice(slab)
        assert flat.n == 2
        assert flat.offset == slab.offset
        assert flat.half_thickness == slab.half_thickness
        assert np.allclose(flat.normal, slab.normal[:2])


class TestProjOrthocomplement:
    def test_already_orthogonal(self):
        out = proj_orthocomplement([np.array([1.0, 0.0])], np.array([0.0, 1.0]))
        assert np.allclose(out, [0, 1])

    def test_inside_span(self):
        out = proj_orthocomplement([np.array([1.0, 0.0])], np.array([1.0, 0.0]))
        assert np.allclose(out, [0, 0])

    def test_two_vector_basis(self):
        basis = [np.array([1.0, 0, 0]), np.array([0, 1.0, 0])]
        out = proj_orthocomplement(basis, np.array([1.0, 1.0, 1.0]))
        assert np.allclose(out, [0, 0, 1])

    def test_empty_basis_returns_vector(self):
        v = np.array([0.3, -0.7, 0.2])
        assert np.array_equal(proj_orthocomplement([], v), v)

    def test_dependent_basis_raises(self):
        basis = [np.array([1.0, 2.0]), np.array([2.0, 4.0])]
        with pytest.raises(DependentBasisError):
            proj_orthocomplement(basis, np.array([0.0, 1.0]))


class TestWedgeNorm:
    def test_orthonormal_square(self):
        assert wedge_norm([np.array([1.0, 0]), np.array([0, 1.0])]) == pytest.approx(1.0)

    def test_rectangle(self):
        assert wedge_norm([np.array([2.0, 0]), np.array([0, 3.0])]) == pytest.approx(6.0)

    def test_base_times_height(self):
        vs = [np.array([1.0, 0, 0]), np.array([1.0, 1.0, 0])]
        assert wedge_norm(vs) == pytest.approx(1.0)

    def test_dependent_input_gives_zero(self):
        vs = [np.array([1.0, 2.0, -1.0]), np.array([2.0, 4.0, -2.0])]
        assert wedge_norm(vs) == 0.0
        assert wedge_norm_projection(vs) == 0.0

    @settings(max_examples=300, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_routes_agree_on_random_input(self, seed):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(2, 7))
        ell = int(rng.integers(1, d + 1))
        vs = [rng.standard_normal(d) for _ in range(ell)]
        g = wedge_norm_gram(vs)
        p = wedge_norm_projection(vs)
        if p > 1e-6:
            assert abs(g - p) <= 1e-10 * max(g, p)
        assert wedge_norm(vs) == pytest.approx(g)

    def test_too_many_vectors_rejected(self):
        with pytest.raises(ValueError):
            wedge_norm([np.ones(2), np.ones(2), np.ones(2)])


class TestValueSemantics:
    def test_sphere_validation(self):
        with pytest.raises(ValueError):
            Sphere(centre=np.zeros(3), radius=0.0)
        with pytest.raises(ValueError):
            Sphere(centre=np.array([1.0]), radius=1.0)

    def test_region_validation(self):
        with pytest.raises(ValueError):
            Region(sphere((0, 0, 0), 1), 0.7)

    def test_slab_validation(self):
        with pytest.raises(ValueError):
            Slab(normal=np.array([1.0, 1.0]), offset=0.0, half_thickness=0.1)

    def test_immutability(self):
        s = sphere((0, 0, 0), 1)
        with pytest.raises(ValueError):
            s.centre[0] = 5.0
