"""Pure-numpy kernel implementations.

These are the fallback twins of the compiled kernels in ``_compiled.pyx``.
Both backends evaluate the same IEEE-754 double operations in the same
order (coordinate sums accumulate left to right), so the boolean masks they
produce are bit-identical and experiment output does not depend on which
backend is active.
"""

import numpy as np

BACKEND_NAME = "numpy"


def _radial_distance(points, centre):
    # Left-to-right accumulation over coordinates; do not replace with
    # einsum/sum, whose reduction order may differ from the compiled twin.
    d0 = points[:, 0] - centre[0]
    acc = d0 * d0
    for k in range(1, points.shape[1]):
        dk = points[:, k] - centre[k]
        acc = acc + dk * dk
    return np.sqrt(acc)


def annulus_mask(points, centre, radius, delta):
    """Strict membership ||y - x| - r| < delta for each row of points."""
    rho = _radial_distance(points, centre)
    return np.abs(rho - radius) < delta


def cap_mask(points, centre, radius, delta, min_cos):
    """Polar-cap membership: annulus hit and vertical direction cosine > min_cos."""
    rho = _radial_distance(points, centre)
    vertical = points[:, points.shape[1] - 1] - centre[centre.shape[0] - 1]
    return (np.abs(rho - radius) < delta) & (vertical > min_cos * rho)


def slab_mask(points, normal, offset, half_thickness):
    """Non-strict membership |<normal, y> - offset| <= half_thickness."""
    acc = normal[0] * points[:, 0]
    for k in range(1, points.shape[1]):
        acc = acc + normal[k] * points[:, k]
    return np.abs(acc - offset) <= half_thickness


def cap_count(points, centres, radii, delta, min_cos):
    """Number of polar caps (one per sphere) containing each point."""
    counts = np.zeros(points.shape[0], dtype=np.int64)
    for j in range(centres.shape[0]):
        counts += cap_mask(points, centres[j], radii[j], delta, min_cos)
    return counts
