"""Shared builders for randomized geometry used across the test modules."""

import math

import numpy as np
import pytest

from fbk.framedlink import NormalFraming, SampledLoop
from fbk.spinlift import RotationLoop, so3_geodesic_loop


def random_rotation(rng: np.random.Generator, m: int) -> np.ndarray:
    """Haar-ish random SO(m) matrix via Gram-Schmidt of a Gaussian matrix."""
    A = rng.normal(size=(m, m))
    Q = np.zeros_like(A)
    for i in range(m):
        w = A[i]
        for j in range(i):
            w = w - (Q[j] @ w) * Q[j]
        Q[i] = w / np.linalg.norm(w)
    if np.linalg.det(Q) < 0.0:
        Q[-1] = -Q[-1]
    return Q


def random_waypoint_loop(rng: np.random.Generator, legs: int = 4, per_leg: int = 12) -> RotationLoop:
    """Closed piecewise-geodesic SO(3) loop through random waypoints."""
    waypoints = [random_rotation(rng, 3) for _ in range(legs)]
    return so3_geodesic_loop(waypoints, per_leg)


def wavy_circle(rng: np.random.Generator, dim: int = 4, samples: int = 96,
                amplitude: float = 0.02) -> SampledLoop:
    """Embedded trigonometric loop: a plane circle plus small higher harmonics.

    Traversal is clockwise so that the radial+constant framing of
    standard_framing assembles with determinant +1.
    """
    harms = []
    for m in (2, 3):
        harms.append((m, rng.normal(size=dim) * amplitude, rng.normal(size=dim) * amplitude))

    def point(t: float) -> np.ndarray:
        a = 2.0 * math.pi * (t % 1.0)
        p = np.zeros(dim)
        p[0] = math.cos(a)
        p[1] = -math.sin(a)
        for (m, u, v) in harms:
            p = p + math.cos(m * a) * u + math.sin(m * a) * v
        return p

    pts = np.array([point(i / samples) for i in range(samples)])
    return SampledLoop(pts, point, [i / samples for i in range(samples)])


def framing_from_callables(loop: SampledLoop, fns) -> NormalFraming:
    fields = [
        np.vstack([np.asarray(fn(loop.points[k], loop.params[k]), dtype=float)
                   for k in range(len(loop))])
        for fn in fns
    ]

    def resample(t: float) -> np.ndarray:
        return np.vstack([np.asarray(fn(loop.point(t), t), dtype=float) for fn in fns])

    return NormalFraming(fields, resample)


def standard_framing(loop: SampledLoop, dim: int = 4) -> NormalFraming:
    """Radial-plus-constant framing for origin-centered near-circular loops."""
    fns = [lambda p, t: p]
    for i in range(2, dim):
        e = np.zeros(dim)
        e[i] = 1.0
        fns.append(lambda p, t, e=e: e)
    return framing_from_callables(loop, fns)


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
