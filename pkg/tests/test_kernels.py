"""Backend equivalence: the compiled kernels must match the numpy twins bit for bit."""

import numpy as np
import pytest

from annumax._kernels import _numpy

compiled = pytest.importorskip("annumax._kernels._compiled")


@pytest.fixture(scope="module")
def cloud():
    rng = np.random.default_rng(1234)
    pts = np.ascontiguousarray(rng.uniform(-2.5, 2.5, (200_000, 3)))
    return pts


@pytest.mark.parametrize("dim", [2, 3, 4, 6])
def test_annulus_mask_agrees(dim):
    rng = np.random.default_rng(dim)
    pts = np.ascontiguousarray(rng.uniform(-2.0, 2.0, (50_000, dim)))
    centre = np.ascontiguousarray(rng.uniform(-0.3, 0.3, dim))
    a = _numpy.annulus_mask(pts, centre, 1.4, 0.02)
    b = compiled.annulus_mask(pts, centre, 1.4, 0.02)
    assert np.array_equal(a, b)
    assert a.any() and not a.all()


def test_cap_mask_agrees(cloud):
    centre = np.zeros(3)
    min_cos = 1.0 - 1.0 / 300.0
    a = _numpy.cap_mask(cloud, centre, 1.5, 0.05, min_cos)
    b = compiled.cap_mask(cloud, centre, 1.5, 0.05, min_cos)
    assert np.array_equal(a, b)


def test_slab_mask_agrees(cloud):
    normal = np.ascontiguousarray(np.array([0.6, 0.8, 0.0]))
    a = _numpy.slab_mask(cloud, normal, 0.3, 0.07)
    b = compiled.slab_mask(cloud, normal, 0.3, 0.07)
    assert np.array_equal(a, b)


def test_cap_count_agrees(cloud):
    rng = np.random.default_rng(7)
    m = 64
    centres = np.ascontiguousarray(
        np.column_stack([rng.uniform(-0.3, 0.3, (m, 2)), np.zeros(m)])
    )
    radii = np.ascontiguousarray(rng.uniform(1.0, 2.0, m))
    min_cos = 1.0 - 1.0 / 300.0
    a = _numpy.cap_count(cloud, centres, radii, 0.05, min_cos)
    b = compiled.cap_count(cloud, centres, radii, 0.05, min_cos)
    assert np.array_equal(a, b)
    assert a.max() >= 1


def test_cap_count_matches_mask_sum(cloud):
    rng = np.random.default_rng(9)
    m = 16
    centres = np.ascontiguousarray(
        np.column_stack([rng.uniform(-0.2, 0.2, (m, 2)), np.zeros(m)])
    )
    radii = np.ascontiguousarray(rng.uniform(1.0, 2.0, m))
    min_cos = 1.0 - 1.0 / 300.0
    counts = compiled.cap_count(cloud, centres, radii, 0.05, min_cos)
    total = np.zeros(cloud.shape[0], dtype=np.int64)
    for j in range(m):
        total += compiled.cap_mask(cloud, centres[j], radii[j], 0.05, min_cos)
    assert np.array_equal(counts, total)
