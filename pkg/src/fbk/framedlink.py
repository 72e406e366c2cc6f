"""Framed links in a presented ambient manifold and their Z2 invariants.

A link component is a sampled closed curve together with framing fields of
its normal bundle. The ambient manifold enters through three pieces of
data: how many dimensions the embedding space has, unit normal fields of
the manifold inside that space, and a spin-twist evaluator that scores
loops by the chosen spin structure (zero for the reference structure).

The index of a framed circle is computed by assembling, sample by sample,
the square matrix whose rows are [manifold normals, curve tangent, framing
fields] orthonormalized, classifying that rotation loop, and flipping the
bit once (plus the spin twist). kappa of a link is the xor of the
component indices; on Euclidean ambients it agrees with the classical
count that also adds the number of components mod 2.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dataclass_field
from functools import reduce
from typing import Callable, Sequence

import numpy as np

from .errors import (
    AmbientMismatch,
    OrientationMismatch,
    TooFewFields,
    ValidationError,
    ParseError,
)
from .numkit import DEFAULT_TOL, Tolerances, orthonormalize
from .spinlift import RotationLoop, Z2, loop_class

_MIN_SAMPLES = 16
_NORMAL_ORTHO_CHECK = 1e-8
# Tangents of sample-only loops come from chord differences, so the check
# against manifold normals must absorb the O(h^2) differencing error.
_NORMAL_TANGENT_CHECK = 1e-4


@dataclass
class SampledLoop:
    """Closed curve in R^N: cyclic samples plus an optional exact resampler."""

    points: np.ndarray
    resample: Callable[[float], np.ndarray] | None = None
    params: Sequence[float] | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2:
            raise ValidationError("loop points must be a list of equal-length vectors")
        if not np.all(np.isfinite(self.points)):
            raise ValidationError("loop points must be finite")
        k = self.points.shape[0]
        if k < _MIN_SAMPLES:
            raise ValidationError(f"a loop needs at least {_MIN_SAMPLES} samples, got {k}")
        steps = np.roll(self.points, -1, axis=0) - self.points
        norms = np.linalg.norm(steps, axis=1)
        if np.any(norms == 0.0):
            raise ValidationError("consecutive loop points must be distinct")
        if self.params is None:
            self.params = [i / k for i in range(k)]
        else:
            self.params = [float(t) for t in self.params]
            if len(self.params) != k:
                raise ValidationError("loop params and points must have equal length")
            if any(not 0.0 <= t < 1.0 for t in self.params):
                raise ValidationError("loop params must lie in [0, 1)")
            if any(b <= a for a, b in zip(self.params, self.params[1:])):
                raise ValidationError("loop params must be strictly increasing")

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def length(self) -> float:
        steps = np.roll(self.points, -1, axis=0) - self.points
        return float(np.sum(np.linalg.norm(steps, axis=1)))

    def point(self, t: float) -> np.ndarray:
        if self.resample is None:
            raise ValidationError("loop has no resample callback")
        return np.asarray(self.resample(t % 1.0), dtype=float)

    def _gap(self) -> float:
        ts = list(self.params) + [self.params[0] + 1.0]
        return min(b - a for a, b in zip(ts, ts[1:]))

    def tangent_at_sample(self, k: int) -> np.ndarray:
        if self.resample is not None:
            return self.tangent(self.params[k])
        n = len(self)
        d = self.points[(k + 1) % n] - self.points[(k - 1) % n]
        return d / np.linalg.norm(d)

    def tangent(self, t: float) -> np.ndarray:
        if self.resample is None:
            raise ValidationError("loop has no resample callback")
        h = 0.25 * self._gap()
        d = self.point(t + h) - self.point(t - h)
        nrm = np.linalg.norm(d)
        if nrm == 0.0:
            raise ValidationError(f"degenerate tangent at parameter {t % 1.0:.6f}")
        return d / nrm

    def arc_fractions(self) -> np.ndarray:
        """Normalized cumulative polygonal arclength at each sample (starts at 0)."""
        steps = np.roll(self.points, -1, axis=0) - self.points
        seg = np.linalg.norm(steps, axis=1)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        return cum[:-1] / cum[-1]

    def arc_fraction(self, t: float) -> float:
        """Arc fraction at parameter t, linearly interpolated between samples."""
        ts = np.asarray(list(self.params) + [self.params[0] + 1.0])
        fr = np.concatenate([self.arc_fractions(), [1.0]])
        u = t % 1.0
        i = int(np.searchsorted(ts, u, side="right")) - 1
        i = max(0, min(i, len(ts) - 2))
        w = (u - ts[i]) / (ts[i + 1] - ts[i])
        return float((1.0 - w) * fr[i] + w * fr[i + 1])

    def with_samples(self, count: int) -> "SampledLoop":
        if self.resample is None:
            raise ValidationError("resampling a loop requires its resample callback")
        pts = np.array([self.point(i / count) for i in range(count)])
        return SampledLoop(pts, self.resample, [i / count for i in range(count)])

    def cycled(self, shift: int) -> "SampledLoop":
        k = len(self)
        shift %= k
        pts = np.roll(self.points, -shift, axis=0)
        base = self.params[shift]
        params = [(self.params[(shift + i) % k] - base) % 1.0 for i in range(k)]
        resample = None
        if self.resample is not None:
            inner = self.resample
            resample = lambda t, b=base: inner((t + b) % 1.0)  # noqa: E731
        return SampledLoop(pts, resample, params)

    def transformed(self, Q: np.ndarray) -> "SampledLoop":
        Q = np.asarray(Q, dtype=float)
        resample = None
        if self.resample is not None:
            inner = self.resample
            resample = lambda t: Q @ inner(t)  # noqa: E731
        return SampledLoop(self.points @ Q.T, resample, list(self.params))

    def translated(self, offset: np.ndarray) -> "SampledLoop":
        offset = np.asarray(offset, dtype=float)
        resample = None
        if self.resample is not None:
            inner = self.resample
            resample = lambda t: inner(t) + offset  # noqa: E731
        return SampledLoop(self.points + offset, resample, list(self.params))

    def reversed(self) -> "SampledLoop":
        k = len(self)
        idx = [0] + list(range(k - 1, 0, -1))
        pts = self.points[idx]
        params = [0.0] + [1.0 - self.params[i] for i in range(k - 1, 0, -1)]
        resample = None
        if self.resample is not None:
            inner = self.resample
            resample = lambda t: inner((1.0 - t) % 1.0)  # noqa: E731
        return SampledLoop(pts, resample, params)


@dataclass
class NormalFraming:
    """k vector fields along a loop, one (samples x dim) array per field."""

    fields: list[np.ndarray]
    resample: Callable[[float], np.ndarray] | None = None

    def __post_init__(self):
        if not self.fields:
            raise ValidationError("a framing needs at least one field")
        self.fields = [np.asarray(f, dtype=float) for f in self.fields]
        shape = self.fields[0].shape
        if len(shape) != 2:
            raise ValidationError("each framing field must be a (samples x dim) array")
        for f in self.fields:
            if f.shape != shape:
                raise ValidationError("framing fields must share one shape")
            if not np.all(np.isfinite(f)):
                raise ValidationError("framing fields must be finite")

    @property
    def count(self) -> int:
        return len(self.fields)

    @property
    def sample_count(self) -> int:
        return self.fields[0].shape[0]

    def at_sample(self, k: int) -> list[np.ndarray]:
        return [f[k] for f in self.fields]

    def at(self, t: float) -> list[np.ndarray]:
        if self.resample is None:
            raise ValidationError("framing has no resample callback")
        vals = np.asarray(self.resample(t % 1.0), dtype=float)
        return [vals[i] for i in range(self.count)]

    def cycled_with(self, loop: SampledLoop, shift: int) -> "NormalFraming":
        base = loop.params[shift % len(loop)]
        fields = [np.roll(f, -(shift % len(loop)), axis=0) for f in self.fields]
        resample = None
        if self.resample is not None:
            inner = self.resample
            resample = lambda t, b=base: inner((t + b) % 1.0)  # noqa: E731
        return NormalFraming(fields, resample)

    def transformed(self, Q: np.ndarray) -> "NormalFraming":
        Q = np.asarray(Q, dtype=float)
        fields = [f @ Q.T for f in self.fields]
        resample = None
        if self.resample is not None:
            inner = self.resample
            resample = lambda t: np.asarray(inner(t)) @ Q.T  # noqa: E731
        return NormalFraming(fields, resample)

    def reversed(self) -> "NormalFraming":
        k = self.sample_count
        idx = [0] + list(range(k - 1, 0, -1))
        fields = [f[idx] for f in self.fields]
        resample = None
        if self.resample is not None:
            inner = self.resample
            resample = lambda t: inner((1.0 - t) % 1.0)  # noqa: E731
        return NormalFraming(fields, resample)


@dataclass
class AmbientPresentation:
    """How the ambient manifold sits in R^N.

    manifold_normals are callables giving pointwise-orthonormal unit normal
    fields of the manifold inside R^N along any curve; spin_twist evaluates
    the chosen spin structure on a loop (constant 0 for the reference
    structure). Ambients with a periodic coordinate declare the plane in
    which winding is counted, which is also what the non-reference spin
    structure pairs with.
    """

    dimension: int
    manifold_normals: list[Callable[[np.ndarray], np.ndarray]] = dataclass_field(
        default_factory=list
    )
    spin_twist: Callable[[SampledLoop], Z2] = lambda loop: Z2(0)
    kind: str = "custom"
    spin_name: str = "standard"
    periodic_plane: tuple[int, int] | None = None

    @property
    def framing_count(self) -> int:
        return self.dimension - len(self.manifold_normals) - 1


def euclidean_ambient(dimension: int) -> AmbientPresentation:
    return AmbientPresentation(dimension, [], lambda loop: Z2(0), kind="euclidean")


def sphere_ambient(dimension: int) -> AmbientPresentation:
    """Unit sphere in R^dimension; the radial field is the single normal."""

    def radial(p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return p / np.linalg.norm(p)

    return AmbientPresentation(dimension, [radial], lambda loop: Z2(0), kind="sphere")


def cylinder_ambient(dimension: int, spin: str = "standard") -> AmbientPresentation:
    """S^1 x R^(N-2) in R^N, the circle factor unit-sized in coordinates (0, 1).

    The reference ("standard") spin structure is the one that extends over
    the filled disc of the circle factor, so its twist evaluator is
    constantly zero; the non-standard structure pairs a loop with its
    winding parity around the circle factor.
    """
    if spin not in ("standard", "nonstandard"):
        raise ValidationError(f"unknown spin structure {spin!r}")

    def radial(p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        out = np.zeros_like(p)
        rho = math.hypot(p[0], p[1])
        out[0] = p[0] / rho
        out[1] = p[1] / rho
        return out

    if spin == "standard":
        twist = lambda loop: Z2(0)  # noqa: E731
    else:
        twist = lambda loop: winding_parity(loop, (0, 1))  # noqa: E731
    return AmbientPresentation(
        dimension, [radial], twist, kind="cylinder", spin_name=spin, periodic_plane=(0, 1)
    )


def winding_parity(loop: SampledLoop, plane: tuple[int, int] = (0, 1)) -> Z2:
    """Parity of the winding number of the loop around 0 in a coordinate plane."""
    return Z2(winding_number(loop, plane) & 1)


def winding_number(loop: SampledLoop, plane: tuple[int, int] = (0, 1)) -> int:
    i, j = plane
    x = loop.points[:, i]
    y = loop.points[:, j]
    if np.any(np.hypot(x, y) == 0.0):
        raise ValidationError("winding is undefined through the axis of the plane")
    ang = np.arctan2(y, x)
    d = np.diff(np.concatenate([ang, ang[:1]]))
    d = (d + math.pi) % (2.0 * math.pi) - math.pi
    if np.any(np.abs(d) > 2.5):
        raise ValidationError("loop is sampled too coarsely for a reliable winding count")
    return int(round(float(np.sum(d)) / (2.0 * math.pi)))


@dataclass
class FramedLink:
    """Disjoint framed circles sharing one ambient presentation."""

    components: list[tuple[SampledLoop, NormalFraming]]
    ambient: AmbientPresentation

    def __post_init__(self):
        want = self.ambient.framing_count
        for n, (loop, framing) in enumerate(self.components):
            if loop.dimension != self.ambient.dimension:
                raise ValidationError(
                    f"component {n}: points live in R^{loop.dimension}, "
                    f"ambient is R^{self.ambient.dimension}"
                )
            if framing.count != want:
                raise ValidationError(
                    f"component {n}: framing has {framing.count} fields, "
                    f"ambient requires {want}"
                )
            if framing.sample_count != len(loop):
                raise ValidationError(
                    f"component {n}: framing sampled at {framing.sample_count} points, "
                    f"loop at {len(loop)}"
                )
            if framing.fields[0].shape[1] != loop.dimension:
                raise ValidationError(
                    f"component {n}: framing vectors have the wrong dimension"
                )


def _assemble_frame(
    ambient: AmbientPresentation,
    point: np.ndarray,
    tangent: np.ndarray,
    field_vectors: Sequence[np.ndarray],
    tol: Tolerances,
    where: str,
) -> np.ndarray:
    normals = [np.asarray(n(point), dtype=float) for n in ambient.manifold_normals]
    for a in range(len(normals)):
        for b in range(a, len(normals)):
            want = 1.0 if a == b else 0.0
            if abs(float(normals[a] @ normals[b]) - want) > _NORMAL_ORTHO_CHECK:
                raise ValidationError(
                    f"manifold normals are not orthonormal at {where}"
                )
        if abs(float(normals[a] @ tangent)) > _NORMAL_TANGENT_CHECK:
            raise ValidationError(
                f"manifold normal {a} is not orthogonal to the curve at {where}"
            )
    rows = normals + [tangent] + [np.asarray(v, dtype=float) for v in field_vectors]
    basis = orthonormalize(rows, tol)
    R = np.vstack(basis)
    if np.linalg.det(R) < 0.0:
        raise OrientationMismatch(
            f"assembled frame has determinant -1 at {where}; row order is "
            "[manifold normals, tangent, framing fields]"
        )
    return R


def frame_matrix_loop(
    loop: SampledLoop,
    framing: NormalFraming,
    ambient: AmbientPresentation,
    tol: Tolerances = DEFAULT_TOL,
) -> RotationLoop:
    """Rotation loop of assembled frames [manifold normals, tangent, framing].

    Each sample yields the N x N matrix whose rows are the orthonormalized
    frame expressed in the standard basis; the determinant must be +1 at
    every sample. When both the loop and the framing can be resampled, the
    returned loop carries a refiner that re-evaluates the geometry.
    """
    samples = []
    for k in range(len(loop)):
        R = _assemble_frame(
            ambient,
            loop.points[k],
            loop.tangent_at_sample(k),
            framing.at_sample(k),
            tol,
            where=f"sample {k}",
        )
        samples.append(R)
    refiner = None
    if loop.resample is not None and framing.resample is not None:

        def refiner(t: float) -> np.ndarray:
            return _assemble_frame(
                ambient,
                loop.point(t),
                loop.tangent(t),
                framing.at(t),
                tol,
                where=f"parameter {t % 1.0:.6f}",
            )

    return RotationLoop(samples, refiner, list(loop.params))


def index_of_circle(
    loop: SampledLoop,
    framing: NormalFraming,
    ambient: AmbientPresentation,
    tol: Tolerances = DEFAULT_TOL,
    stats: dict | None = None,
) -> Z2:
    """Index of one framed circle: frame-loop class, flipped once, plus twist."""
    cls = loop_class(frame_matrix_loop(loop, framing, ambient, tol), tol, stats)
    return cls ^ Z2(1) ^ ambient.spin_twist(loop)


def kappa(link: FramedLink, tol: Tolerances = DEFAULT_TOL) -> Z2:
    """Degree of a framed link: xor of the component indices (empty link: 0)."""
    bits = [
        index_of_circle(loop, framing, link.ambient, tol)
        for loop, framing in link.components
    ]
    return reduce(lambda a, b: a ^ b, bits, Z2(0))


def delta_pontryagin(link: FramedLink, tol: Tolerances = DEFAULT_TOL) -> Z2:
    """Classical Z2 count for Euclidean ambients.

    Sum (xor) of the frame-loop classes of all components plus the number
    of components mod 2. Agrees with kappa on every Euclidean link.
    """
    if link.ambient.kind != "euclidean" or link.ambient.manifold_normals:
        raise AmbientMismatch("this count is defined on Euclidean ambients only")
    total = Z2(len(link.components) & 1)
    for loop, framing in link.components:
        total = total ^ loop_class(frame_matrix_loop(loop, framing, link.ambient, tol), tol)
    return total


def twist_framing(loop: SampledLoop, framing: NormalFraming, turns: int) -> NormalFraming:
    """Compose a framing with rotation by 2*pi*turns in its first two fields.

    The rotation angle advances with normalized arclength, so integer turns
    keep the framing cyclically continuous.
    """
    if framing.count < 2:
        raise TooFewFields("twisting needs at least two framing fields")
    turns = int(turns)
    frac = loop.arc_fractions()
    f0, f1 = framing.fields[0], framing.fields[1]
    ang = 2.0 * math.pi * turns * frac
    c = np.cos(ang)[:, None]
    s = np.sin(ang)[:, None]
    new_fields = [c * f0 + s * f1, -s * f0 + c * f1] + [f.copy() for f in framing.fields[2:]]
    resample = None
    if framing.resample is not None:
        inner = framing.resample

        def resample(t: float) -> np.ndarray:
            vals = np.asarray(inner(t % 1.0), dtype=float).copy()
            a = 2.0 * math.pi * turns * loop.arc_fraction(t)
            ca, sa = math.cos(a), math.sin(a)
            v0 = ca * vals[0] + sa * vals[1]
            v1 = -sa * vals[0] + ca * vals[1]
            vals[0] = v0
            vals[1] = v1
            return vals

    return NormalFraming(new_fields, resample)


@dataclass
class ComponentReport:
    index: int
    winding: int | None
    samples: int
    length: float

    def to_dict(self) -> dict:
        return {
            "index": int(self.index),
            "winding": self.winding,
            "samples": self.samples,
            "length": self.length,
        }


@dataclass
class InvariantReport:
    components: list[ComponentReport]
    kappa: Z2
    nonzero_count_mod2: Z2
    diagnostics: dict

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "components": [c.to_dict() for c in self.components],
            "kappa": int(self.kappa),
            "nonzero_count_mod2": int(self.nonzero_count_mod2),
            "diagnostics": self.diagnostics,
        }


def invariant_report(link: FramedLink, tol: Tolerances = DEFAULT_TOL) -> InvariantReport:
    """Per-component indices, winding parity where defined, and kappa."""
    comps = []
    bits = []
    depth = 0
    for loop, framing in link.components:
        stats: dict = {}
        bit = index_of_circle(loop, framing, link.ambient, tol, stats)
        bits.append(bit)
        depth = max(depth, stats.get("max_depth", 0))
        winding = None
        if link.ambient.periodic_plane is not None:
            winding = int(winding_parity(loop, link.ambient.periodic_plane))
        comps.append(ComponentReport(int(bit), winding, len(loop), loop.length()))
    total = reduce(lambda a, b: a ^ b, bits, Z2(0))
    nonzero = Z2(sum(int(b) for b in bits) & 1)
    diagnostics = {
        "max_residual": None,
        "refinement_depth": depth,
        "tolerances": {
            "ortho_tol": tol.ortho_tol,
            "newton_tol": tol.newton_tol,
            "closure_tol": tol.closure_tol,
            "lift_angle_max": tol.lift_angle_max,
        },
    }
    return InvariantReport(comps, total, nonzero, diagnostics)


def _require(condition: bool, message: str):
    if not condition:
        raise ValidationError(message)


def load_link(document: dict) -> FramedLink:
    """Build a FramedLink from a parsed link document (see load_link_file)."""
    _require(isinstance(document, dict), "top level must be an object")
    _require("ambient" in document, "missing field: ambient")
    _require("components" in document, "missing field: components")
    amb = document["ambient"]
    _require(isinstance(amb, dict), "ambient must be an object")
    _require("kind" in amb, "missing field: ambient.kind")
    _require("dimension" in amb, "missing field: ambient.dimension")
    kind = amb["kind"]
    dim = amb["dimension"]
    _require(isinstance(dim, int) and dim >= 3, "ambient.dimension must be an integer >= 3")
    spin = amb.get("spin_twist", "standard")
    if kind == "euclidean":
        _require(spin == "standard", "euclidean space has a unique spin structure")
        ambient = euclidean_ambient(dim)
    elif kind == "sphere":
        _require(spin == "standard", "spheres have a unique spin structure")
        ambient = sphere_ambient(dim)
    elif kind == "cylinder":
        ambient = cylinder_ambient(dim, spin)
    else:
        raise ValidationError(f"unknown ambient kind {kind!r}")
    comps = []
    _require(isinstance(document["components"], list), "components must be a list")
    for n, comp in enumerate(document["components"]):
        _require(isinstance(comp, dict), f"component {n} must be an object")
        _require("points" in comp, f"component {n}: missing field points")
        _require("framing" in comp, f"component {n}: missing field framing")
        try:
            pts = np.asarray(comp["points"], dtype=float)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"component {n}: points are not numeric") from exc
        _require(pts.ndim == 2, f"component {n}: points must be a list of vectors")
        _require(
            pts.shape[1] == dim,
            f"component {n}: points live in R^{pts.shape[1]}, ambient is R^{dim}",
        )
        if kind == "sphere":
            radii = np.linalg.norm(pts, axis=1)
            _require(
                bool(np.max(np.abs(radii - 1.0)) < 1e-6),
                f"component {n}: points must lie on the unit sphere",
            )
        if kind == "cylinder":
            rho = np.hypot(pts[:, 0], pts[:, 1])
            _require(
                bool(np.max(np.abs(rho - 1.0)) < 1e-6),
                f"component {n}: points must lie on the unit circle factor",
            )
        loop = SampledLoop(pts)
        try:
            fields_raw = np.asarray(comp["framing"], dtype=float)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"component {n}: framing is not numeric") from exc
        _require(
            fields_raw.ndim == 3,
            f"component {n}: framing must be [field][sample][coordinate]",
        )
        _require(
            fields_raw.shape[0] == ambient.framing_count,
            f"component {n}: framing has {fields_raw.shape[0]} fields, "
            f"ambient requires {ambient.framing_count}",
        )
        _require(
            fields_raw.shape[1] == len(loop) and fields_raw.shape[2] == dim,
            f"component {n}: framing shape does not match the loop",
        )
        framing = NormalFraming([fields_raw[i] for i in range(fields_raw.shape[0])])
        comps.append((loop, framing))
    return FramedLink(comps, ambient)


def load_link_file(path: str) -> FramedLink:
    """Parse a JSON link file and validate it into a FramedLink."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            document = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return load_link(document)
