"""Homotopy class of closed rotation loops via lifting through the double cover.

A loop of special-orthogonal matrices R(t) in SO(m), m >= 3, is either
contractible or not; the two cases are told apart by lifting the loop
continuously to the double cover and checking whether the lift closes on +1
or on -1. The cover is realized inside the real Clifford algebra Cl(m) with
generators e_i, e_i e_i = +1, e_i e_j = -e_j e_i: rotations near the
identity have a canonical lift (the rotor with positive scalar part), so
the loop is walked in small relative steps R_{k+1} R_k^T, each step lifted
canonically, and the lifts are accumulated.

For m = 3 there is an entirely separate lift through unit quaternions
(quaternion_loop_class), used as an independent cross-check of the Clifford
route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    LiftInconsistent,
    NotNearIdentity,
    NotOrthogonal,
    RefinementExhausted,
)
from .numkit import DEFAULT_TOL, Tolerances

_MAX_DIM = 12
_MAX_REFINE_DEPTH = 24
_ORTHO_CHECK = 1e-8


class Z2(int):
    """An element of Z/2 with xor as the group operation."""

    def __new__(cls, bit):
        b = int(bit)
        if b not in (0, 1):
            raise ValueError("Z2 takes the values 0 and 1")
        return super().__new__(cls, b)

    @property
    def bit(self) -> int:
        return int(self)

    def __xor__(self, other):
        return Z2(int(self) ^ _z2_bit(other))

    __rxor__ = __xor__
    # Group addition in Z/2 is xor.
    __add__ = __xor__
    __radd__ = __xor__

    def __neg__(self):
        return self

    def __repr__(self):
        return f"Z2({int(self)})"


def _z2_bit(value) -> int:
    b = int(value)
    if b not in (0, 1):
        raise ValueError(f"not a Z2 value: {value!r}")
    return b


def _blade_sign(a: int, b: int) -> int:
    """Sign of e_a * e_b from counting transpositions between blade bitmasks."""
    a >>= 1
    total = 0
    while a:
        total += (a & b).bit_count()
        a >>= 1
    return -1 if total & 1 else 1


@dataclass
class CliffordElement:
    """Sparse multivector in Cl(m): blade bitmask -> real coefficient."""

    dim: int
    coeffs: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if not 3 <= self.dim <= _MAX_DIM:
            raise DimensionMismatch(f"Clifford dimension {self.dim} outside [3, {_MAX_DIM}]")
        self.coeffs = {b: float(c) for b, c in self.coeffs.items() if c != 0.0}

    @classmethod
    def scalar(cls, dim: int, value: float) -> "CliffordElement":
        return cls(dim, {0: float(value)})

    @classmethod
    def blade(cls, dim: int, bits: int, value: float = 1.0) -> "CliffordElement":
        return cls(dim, {bits: float(value)})

    @classmethod
    def vector(cls, dim: int, coords: Sequence[float]) -> "CliffordElement":
        return cls(dim, {1 << i: float(c) for i, c in enumerate(coords)})

    @property
    def scalar_part(self) -> float:
        return self.coeffs.get(0, 0.0)

    def norm(self) -> float:
        return math.sqrt(sum(c * c for c in self.coeffs.values()))

    def reverse(self) -> "CliffordElement":
        out = {}
        for bits, c in self.coeffs.items():
            k = bits.bit_count()
            out[bits] = -c if (k * (k - 1) // 2) & 1 else c
        return CliffordElement(self.dim, out)

    def grade(self, k: int) -> "CliffordElement":
        return CliffordElement(
            self.dim, {b: c for b, c in self.coeffs.items() if b.bit_count() == k}
        )

    def __mul__(self, other):
        if isinstance(other, CliffordElement):
            return geometric_product(self, other)
        return CliffordElement(self.dim, {b: c * float(other) for b, c in self.coeffs.items()})

    def __rmul__(self, other):
        return self.__mul__(other)

    def __add__(self, other: "CliffordElement") -> "CliffordElement":
        if self.dim != other.dim:
            raise DimensionMismatch("cannot add elements of different dimension")
        out = dict(self.coeffs)
        for b, c in other.coeffs.items():
            out[b] = out.get(b, 0.0) + c
        return CliffordElement(self.dim, out)

    def __sub__(self, other: "CliffordElement") -> "CliffordElement":
        return self + (other * -1.0)

    def distance_to_scalar(self, value: float) -> float:
        diff = dict(self.coeffs)
        diff[0] = diff.get(0, 0.0) - value
        return math.sqrt(sum(c * c for c in diff.values()))

    def apply_to_vector(self, v: Sequence[float]) -> np.ndarray:
        """Sandwich action r v reverse(r), returning the grade-1 part."""
        x = CliffordElement.vector(self.dim, v)
        out = geometric_product(geometric_product(self, x), self.reverse())
        res = np.zeros(self.dim)
        for i in range(self.dim):
            res[i] = out.coeffs.get(1 << i, 0.0)
        return res

    def rotation_matrix(self) -> np.ndarray:
        """Matrix of the sandwich action on the standard basis (columns)."""
        cols = [self.apply_to_vector(np.eye(self.dim)[i]) for i in range(self.dim)]
        return np.column_stack(cols)

    def normalized_rotor(self) -> "CliffordElement":
        s = geometric_product(self, self.reverse()).scalar_part
        if s <= 0.0:
            raise LiftInconsistent("rotor norm collapsed while renormalizing")
        return self * (1.0 / math.sqrt(s))


def geometric_product(a: CliffordElement, b: CliffordElement) -> CliffordElement:
    """Bilinear Clifford product with e_i e_i = +1 and e_i e_j = -e_j e_i."""
    if a.dim != b.dim:
        raise DimensionMismatch(f"dimensions differ: {a.dim} vs {b.dim}")
    out: dict[int, float] = {}
    for ba, ca in a.coeffs.items():
        for bb, cb in b.coeffs.items():
            key = ba ^ bb
            out[key] = out.get(key, 0.0) + _blade_sign(ba, bb) * ca * cb
    if out:
        top = max(abs(c) for c in out.values())
        cutoff = 1e-16 * top
        out = {b: c for b, c in out.items() if abs(c) > cutoff}
    return CliffordElement(a.dim, out)


def _check_special_orthogonal(R: np.ndarray) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise NotOrthogonal("rotation sample is not square")
    m = R.shape[0]
    defect = np.max(np.abs(R.T @ R - np.eye(m)))
    if defect > _ORTHO_CHECK:
        raise NotOrthogonal(f"orthogonality defect {defect:.3e}")
    if np.linalg.det(R) <= 0.0:
        raise NotOrthogonal("determinant is not positive")
    return R


def rotor_from_rotation(R: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> CliffordElement:
    """Canonical rotor (positive scalar part) for a near-identity rotation.

    R is factored into Givens rotations by eliminating below-diagonal
    entries column by column; each factor has the exact rotor
    cos(theta/2) - sin(theta/2) e_i e_j, and the factors are multiplied in
    order. Raises NotNearIdentity when the resulting scalar part is too
    small for the sign choice to be trustworthy (some principal angle is
    close to pi).
    """
    R = _check_special_orthogonal(R)
    m = R.shape[0]
    if not 3 <= m <= _MAX_DIM:
        raise DimensionMismatch(f"rotation dimension {m} outside [3, {_MAX_DIM}]")
    M = R.copy()
    rotor = CliffordElement.scalar(m, 1.0)
    for j in range(m - 1):
        for i in range(j + 1, m):
            a = M[j, j]
            b = M[i, j]
            r = math.hypot(a, b)
            if r < 1e-300 or (abs(b) <= 1e-15 * r and a > 0.0):
                continue
            c = a / r
            s = b / r
            rj = c * M[j, :] + s * M[i, :]
            ri = -s * M[j, :] + c * M[i, :]
            M[j, :] = rj
            M[i, :] = ri
            theta = math.atan2(s, c)
            factor = CliffordElement(
                m, {0: math.cos(theta / 2.0), (1 << j) | (1 << i): -math.sin(theta / 2.0)}
            )
            rotor = rotor * factor
    if np.max(np.abs(M - np.eye(m))) > 1e-6:
        raise NotNearIdentity("a principal rotation angle is at pi; no canonical lift")
    s0 = rotor.scalar_part
    if abs(s0) < 0.1:
        raise NotNearIdentity(f"rotor scalar part {s0:.3e} too small for a canonical sign")
    if s0 < 0.0:
        rotor = rotor * -1.0
    return rotor.normalized_rotor()


@dataclass
class RotationLoop:
    """Cyclic sequence of SO(m) samples, optionally refinable.

    params are sample parameters in [0, 1), strictly increasing; the loop
    closes from the last sample back to the first. refiner(t) must return
    the underlying rotation at any parameter t in [0, 1) and is used to
    subdivide steps that rotate too far, re-evaluating the geometry rather
    than interpolating matrices.
    """

    samples: list[np.ndarray]
    refiner: Callable[[float], np.ndarray] | None = None
    params: Sequence[float] | None = None

    def __post_init__(self):
        if len(self.samples) < 1:
            raise ValueError("a rotation loop needs at least one sample")
        self.samples = [_check_special_orthogonal(R) for R in self.samples]
        m = self.samples[0].shape[0]
        if any(R.shape[0] != m for R in self.samples):
            raise DimensionMismatch("samples have mixed dimensions")
        if self.params is None:
            k = len(self.samples)
            self.params = [i / k for i in range(k)]
        else:
            self.params = [float(t) for t in self.params]
            if len(self.params) != len(self.samples):
                raise ValueError("params and samples must have equal length")
            if any(not 0.0 <= t < 1.0 for t in self.params):
                raise ValueError("params must lie in [0, 1)")
            if any(b <= a for a, b in zip(self.params, self.params[1:])):
                raise ValueError("params must be strictly increasing")

    @property
    def dim(self) -> int:
        return self.samples[0].shape[0]

    def __len__(self) -> int:
        return len(self.samples)


def _angle_step_bound(lift_angle_max: float) -> float:
    # A rotation whose principal angles are all <= theta satisfies
    # |R - I|_F <= 2*sqrt(2)*sin(theta/2) with equality on a single plane,
    # so bounding the Frobenius defect bounds every principal angle.
    return 2.0 * math.sqrt(2.0) * math.sin(lift_angle_max / 2.0)


def _refined_steps(
    loop: RotationLoop, tol: Tolerances, stats: dict | None = None
) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Consecutive sample pairs around the cycle, subdivided to the angle bound."""
    bound = _angle_step_bound(tol.lift_angle_max)
    k = len(loop)
    for idx in range(k):
        t0 = loop.params[idx]
        r0 = loop.samples[idx]
        if idx + 1 < k:
            t1 = loop.params[idx + 1]
            r1 = loop.samples[idx + 1]
        else:
            t1 = loop.params[0] + 1.0
            r1 = loop.samples[0]
        stack = [(t0, r0, t1, r1, 0)]
        while stack:
            a_t, a_r, b_t, b_r, depth = stack.pop()
            if np.linalg.norm(b_r @ a_r.T - np.eye(loop.dim)) <= bound:
                if stats is not None:
                    stats["steps"] = stats.get("steps", 0) + 1
                    stats["max_depth"] = max(stats.get("max_depth", 0), depth)
                yield a_r, b_r
                continue
            if loop.refiner is None:
                raise RefinementExhausted(
                    f"step at parameter {a_t % 1.0:.6f} exceeds the angle bound "
                    "and the loop has no refiner"
                )
            if depth >= _MAX_REFINE_DEPTH:
                raise RefinementExhausted(
                    f"refinement depth {depth} exhausted near parameter {a_t % 1.0:.6f}"
                )
            m_t = 0.5 * (a_t + b_t)
            m_r = _check_special_orthogonal(loop.refiner(m_t % 1.0))
            stack.append((m_t, m_r, b_t, b_r, depth + 1))
            stack.append((a_t, a_r, m_t, m_r, depth + 1))


def loop_class(
    loop: RotationLoop, tol: Tolerances = DEFAULT_TOL, stats: dict | None = None
) -> Z2:
    """Class of a closed SO(m) loop in its fundamental group, as a Z2 bit.

    Walks the cycle in relative steps R_{k+1} R_k^T, lifts each step to the
    canonical rotor and accumulates the lifts (later steps act on the
    left). On closure the product projects to the identity, so it must be
    +-1; 0 means the lift closed on +1, 1 means it closed on -1.
    """
    if loop.dim < 3:
        raise DimensionMismatch("loop classification needs dimension >= 3")
    g = CliffordElement.scalar(loop.dim, 1.0)
    count = 0
    for r_prev, r_next in _refined_steps(loop, tol, stats):
        step = rotor_from_rotation(r_next @ r_prev.T, tol)
        g = step * g
        count += 1
        if count % 64 == 0:
            g = g.normalized_rotor()
    d_plus = g.distance_to_scalar(1.0)
    d_minus = g.distance_to_scalar(-1.0)
    if min(d_plus, d_minus) > 1e-4:
        raise LiftInconsistent(
            f"lift closed at distance {min(d_plus, d_minus):.3e} from both +1 and -1"
        )
    return Z2(0 if d_plus <= d_minus else 1)


def _quat_from_matrix(R: np.ndarray) -> np.ndarray:
    """One of the two unit quaternions (w, x, y, z) covering R in SO(3)."""
    t = R[0, 0] + R[1, 1] + R[2, 2]
    if t > 0.0:
        s = math.sqrt(t + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
        )
    elif R[0, 0] >= R[1, 1] and R[0, 0] >= R[2, 2]:
        s = math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        q = np.array(
            [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
        )
    elif R[1, 1] >= R[2, 2]:
        s = math.sqrt(1.0 - R[0, 0] + R[1, 1] - R[2, 2]) * 2.0
        q = np.array(
            [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
        )
    else:
        s = math.sqrt(1.0 - R[0, 0] - R[1, 1] + R[2, 2]) * 2.0
        q = np.array(
            [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
        )
    return q / np.linalg.norm(q)


def quaternion_loop_class(loop: RotationLoop, tol: Tolerances = DEFAULT_TOL) -> Z2:
    """Same contract as loop_class for m = 3, lifted through unit quaternions.

    Every sample is converted to a quaternion independently and the sign
    ambiguity is resolved by nearest-lift continuity; the Clifford algebra
    is never touched, so this is a genuinely separate route to the bit.
    """
    if loop.dim != 3:
        raise DimensionMismatch("the quaternion lift is specific to SO(3)")
    q_start = None
    q_prev = None
    for r_prev, r_next in _refined_steps(loop, tol):
        if q_start is None:
            q_start = _quat_from_matrix(r_prev)
            for x in q_start:
                if abs(x) > 1e-8:
                    if x < 0.0:
                        q_start = -q_start
                    break
            q_prev = q_start
        q_next = _quat_from_matrix(r_next)
        d = float(q_next @ q_prev)
        if abs(d) < 0.05:
            raise LiftInconsistent("consecutive quaternion lifts are nearly orthogonal")
        if d < 0.0:
            q_next = -q_next
        q_prev = q_next
    if q_start is None:
        return Z2(0)
    d = float(q_prev @ q_start)
    if abs(d) < 0.9:
        raise LiftInconsistent(f"quaternion lift closed at |dot| = {abs(d):.3f}")
    return Z2(0 if d > 0.0 else 1)


def stabilize_loop(loop: RotationLoop, target: int) -> RotationLoop:
    """Block-embed an SO(m) loop into SO(target) as diag(R, I)."""
    m = loop.dim
    if not m <= target <= _MAX_DIM:
        raise DimensionMismatch(f"target {target} must lie in [{m}, {_MAX_DIM}]")

    def embed(R: np.ndarray) -> np.ndarray:
        out = np.eye(target)
        out[:m, :m] = R
        return out

    refiner = None
    if loop.refiner is not None:
        inner = loop.refiner
        refiner = lambda t: embed(inner(t))  # noqa: E731
    return RotationLoop([embed(R) for R in loop.samples], refiner, list(loop.params))


def concatenate_loops(first: RotationLoop, second: RotationLoop) -> RotationLoop:
    """Traverse first then second, each compressed into half the parameter range."""
    if first.dim != second.dim:
        raise DimensionMismatch("loops have different dimensions")
    params = [0.5 * t for t in first.params] + [0.5 + 0.5 * t for t in second.params]
    samples = list(first.samples) + list(second.samples)
    refiner = None
    if first.refiner is not None and second.refiner is not None:
        f, s = first.refiner, second.refiner

        def refiner(t: float) -> np.ndarray:
            if t < 0.5:
                return f(2.0 * t)
            return s(2.0 * t - 1.0)

    return RotationLoop(samples, refiner, params)


def plane_rotation(m: int, i: int, j: int, theta: float) -> np.ndarray:
    """Rotation of R^m by theta in the oriented (e_i, e_j) coordinate plane."""
    if not (0 <= i < m and 0 <= j < m and i != j):
        raise ValueError("plane indices out of range")
    R = np.eye(m)
    c, s = math.cos(theta), math.sin(theta)
    R[i, i] = c
    R[j, j] = c
    R[j, i] = s
    R[i, j] = -s
    return R


def _so3_log(R: np.ndarray) -> np.ndarray:
    """Rotation vector (axis * angle) of an SO(3) matrix, angle in [0, pi)."""
    c = (np.trace(R) - 1.0) / 2.0
    c = min(1.0, max(-1.0, c))
    angle = math.acos(c)
    if angle < 1e-12:
        return np.zeros(3)
    if angle > math.pi - 1e-6:
        raise ValueError("rotation angle at pi; geodesic midpoint is ambiguous")
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    return w * (angle / (2.0 * math.sin(angle)))


def _so3_exp(w: np.ndarray) -> np.ndarray:
    angle = float(np.linalg.norm(w))
    if angle < 1e-12:
        return np.eye(3)
    k = w / angle
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + math.sin(angle) * K + (1.0 - math.cos(angle)) * (K @ K)


def so3_geodesic_loop(waypoints: Sequence[np.ndarray], samples_per_leg: int = 16) -> RotationLoop:
    """Closed piecewise-geodesic loop through SO(3) waypoints, with exact refiner.

    The loop visits each waypoint in order and returns to the first; every
    leg is the shortest geodesic, so the refiner re-evaluates the true
    underlying path at any parameter.
    """
    pts = [_check_special_orthogonal(np.asarray(w, dtype=float)) for w in waypoints]
    if len(pts) < 1:
        raise ValueError("need at least one waypoint")
    legs = len(pts)
    logs = []
    for i in range(legs):
        a = pts[i]
        b = pts[(i + 1) % legs]
        logs.append(_so3_log(a.T @ b))

    def at(t: float) -> np.ndarray:
        u = (t % 1.0) * legs
        i = min(int(u), legs - 1)
        s = u - i
        return pts[i] @ _so3_exp(s * logs[i])

    params = []
    samples = []
    total = legs * samples_per_leg
    for k in range(total):
        t = k / total
        params.append(t)
        samples.append(at(t))
    return RotationLoop(samples, at, params)
