"""Numerical extraction of framed links from analytic input.

Two sources are supported. Regular-value preimages: a map into a sphere or
into R^n is traced through the one-dimensional preimage of a regular value
with a tangent-predictor / Newton-corrector walk, and the derivative of the
map pulls a fixed basis of the target tangent space back to a framing of
the traced curve. Section zero loci: a transverse section of the subbundle
of a sphere's tangent bundle orthogonal to a unit splitting field is traced
through its zeros, and the index of each zero circle is assembled from two
frame loops, one carrying an auxiliary transported frame of the curve's
normal space, the other carrying the derivative of the section applied to
that frame. The auxiliary frame drops out of the final bit, which the
closure-twist invariance suite checks explicitly.

Sphere-valued maps are reduced near the regular value to R^n-valued
residuals by projecting onto the tangent space of the target at that value;
the same projection basis defines the induced framing, and changing it by a
constant rotation does not move the computed class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field
from functools import reduce as _reduce
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import schur

from .errors import (
    AmbientMismatch,
    DuplicateComponent,
    EvaluationFailure,
    NoConvergence,
    NonTransverse,
    NotClosed,
    RankDeficient,
    Singular,
    ValidationError,
)
from .framedlink import (
    AmbientPresentation,
    ComponentReport,
    FramedLink,
    InvariantReport,
    NormalFraming,
    SampledLoop,
    _assemble_frame,
    invariant_report,
    sphere_ambient,
    twist_framing,
)
from .numkit import (
    DEFAULT_TOL,
    Tolerances,
    jacobian_fd,
    kernel_direction,
    least_squares,
    orthonormalize,
)
from .spinlift import RotationLoop, Z2, loop_class


@dataclass
class MapSpec:
    """A smooth map together with the data needed to trace a preimage.

    target is "rn" (regular value 0 in R^n) or "sphere" (regular value on
    the unit sphere of the evaluator's output space). domain is "euclidean"
    or "unit_sphere"; in the latter case the evaluator is only consulted on
    the unit sphere of R^dimension and the sphere equation joins the traced
    system. An analytic jacobian of the raw evaluator takes precedence over
    finite differences.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    dimension: int
    target: str = "rn"
    regular_value: np.ndarray | None = None
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None
    domain: str = "euclidean"

    def __post_init__(self):
        if self.target not in ("rn", "sphere"):
            raise ValueError(f"unknown target kind {self.target!r}")
        if self.domain not in ("euclidean", "unit_sphere"):
            raise ValueError(f"unknown domain constraint {self.domain!r}")
        if self.target == "sphere":
            if self.regular_value is None:
                raise ValueError("sphere targets need a regular value")
            x0 = np.asarray(self.regular_value, dtype=float)
            self.regular_value = x0 / np.linalg.norm(x0)


@dataclass
class SectionSpec:
    """Splitting field v and section w on the unit sphere M = S^(n+1) in R^(n+2).

    v must be a unit tangent field of the sphere; w must be tangent,
    orthogonal to v, and transverse to zero. The traced object is the zero
    locus of w; the bundle whose degree is computed is the orthogonal
    complement of v inside the tangent bundle.
    """

    sphere_dimension: int
    splitting_field: Callable[[np.ndarray], np.ndarray]
    section: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None

    @property
    def embedding_dimension(self) -> int:
        return self.sphere_dimension + 1


@dataclass
class TraceOptions:
    seeds: list = dataclass_field(default_factory=list)
    initial_step: float = 0.05
    min_step: float = 1e-5
    max_step: float = 0.1
    max_steps: int = 4000
    tolerances: Tolerances = dataclass_field(default_factory=Tolerances)

    def __post_init__(self):
        if not 0.0 < self.min_step <= self.initial_step <= self.max_step:
            raise ValueError("need 0 < min_step <= initial_step <= max_step")
        if self.max_steps < 64:
            raise ValueError("max_steps must be at least 64")


def target_basis(spec: MapSpec, target_dim: int) -> np.ndarray:
    """Deterministic orthonormal basis of the target tangent space (rows).

    For R^n targets this is the standard basis. For sphere targets the
    coordinate directions are projected onto the tangent space at the
    regular value and orthonormalized in index order, keeping the first
    independent ones.
    """
    if spec.target == "rn":
        return np.eye(target_dim)
    x0 = spec.regular_value
    rows: list[np.ndarray] = []
    for i in range(x0.size):
        w = np.zeros(x0.size)
        w[i] = 1.0
        w = w - (x0 @ w) * x0
        for q in rows:
            w = w - (q @ w) * q
        n = np.linalg.norm(w)
        if n > 1e-8:
            rows.append(w / n)
        if len(rows) == target_dim:
            break
    return np.vstack(rows)


class _TracedSystem:
    """Residual/Jacobian pair whose zero set is the traced curve."""

    def __init__(self, residual, jacobian, dimension):
        self.residual = residual
        self.jacobian = jacobian
        self.dimension = dimension


def _map_system(spec: MapSpec) -> _TracedSystem:
    raw_jac = spec.jacobian or (lambda p: jacobian_fd(spec.evaluator, p))
    if spec.target == "sphere":
        x0 = spec.regular_value
        basis = target_basis(spec, x0.size - 1)

        def f_target(p):
            return basis @ (np.asarray(spec.evaluator(p), dtype=float) - x0)

        def j_target(p):
            return basis @ np.asarray(raw_jac(p), dtype=float)

    else:

        def f_target(p):
            return np.asarray(spec.evaluator(p), dtype=float)

        def j_target(p):
            return np.asarray(raw_jac(p), dtype=float)

    if spec.domain == "unit_sphere":

        def residual(p):
            return np.concatenate([f_target(p), [(p @ p - 1.0) / 2.0]])

        def jacobian(p):
            return np.vstack([j_target(p), p])

    else:
        residual = f_target
        jacobian = j_target
    return _TracedSystem(residual, jacobian, spec.dimension)


def _frame_jacobian(spec: MapSpec, p: np.ndarray) -> np.ndarray:
    """Derivative of the reduced map restricted to the domain tangent space."""
    raw_jac = spec.jacobian or (lambda q: jacobian_fd(spec.evaluator, q))
    J = np.asarray(raw_jac(p), dtype=float)
    if spec.target == "sphere":
        basis = target_basis(spec, np.asarray(spec.regular_value).size - 1)
        J = basis @ J
    if spec.domain == "unit_sphere":
        J = J - np.outer(J @ p, p)
    return J


def _section_system(spec: SectionSpec) -> _TracedSystem:
    raw_jac = spec.jacobian or (lambda p: jacobian_fd(spec.section, p))

    def residual(p):
        return np.concatenate(
            [np.asarray(spec.section(p), dtype=float), [(p @ p - 1.0) / 2.0]]
        )

    def jacobian(p):
        return np.vstack([np.asarray(raw_jac(p), dtype=float), p])

    return _TracedSystem(residual, jacobian, spec.embedding_dimension)


def _newton(
    system: _TracedSystem,
    start: np.ndarray,
    tol: Tolerances,
    max_iter: int = 12,
    max_move: float | None = None,
):
    """Gauss-Newton correction onto the solution set; returns (point, residual).

    max_move bounds the total correction distance; it turns the correction
    into a local operation so that seeds far from the solution set fail
    instead of wandering onto an arbitrary component.
    """
    p = np.asarray(start, dtype=float).copy()
    scale = 1.0 + float(np.linalg.norm(p))
    budget = 10.0 * scale if max_move is None else max_move
    moved = 0.0
    for _ in range(max_iter):
        try:
            r = system.residual(p)
        except Exception as exc:  # noqa: BLE001
            raise EvaluationFailure("map evaluation failed during correction") from exc
        rn = float(np.linalg.norm(r))
        if rn < tol.newton_tol:
            return p, rn
        J = system.jacobian(p)
        step, *_ = np.linalg.lstsq(J, -r, rcond=None)
        sn = float(np.linalg.norm(step))
        if not np.isfinite(sn) or sn > 2.0 * scale:
            raise NoConvergence("correction step diverged")
        p = p + step
        moved += sn
        if moved > budget:
            raise NoConvergence("correction wandered too far from the start point")
    r = system.residual(p)
    rn = float(np.linalg.norm(r))
    if rn < tol.newton_tol:
        return p, rn
    raise NoConvergence(f"corrector stalled at residual {rn:.3e}")


def _newton_aligned(system, start, anchor, direction, tol):
    """Newton correction onto the curve intersected with a transverse hyperplane."""

    def residual(p):
        return np.concatenate([system.residual(p), [(p - anchor) @ direction]])

    def jacobian(p):
        return np.vstack([system.jacobian(p), direction])

    return _newton(_TracedSystem(residual, jacobian, system.dimension), start, tol)


def _tangent_of(system: _TracedSystem, p: np.ndarray, previous, tol: Tolerances) -> np.ndarray:
    try:
        return kernel_direction(system.jacobian(p), previous, tol)
    except RankDeficient as exc:
        raise Singular("rank drop along the curve; transversality violated") from exc


def _trace(system: _TracedSystem, seed: np.ndarray, opts: TraceOptions, stats: dict | None):
    tol = opts.tolerances
    seed = np.asarray(seed, dtype=float)
    if seed.size != system.dimension:
        raise ValueError(f"seed has dimension {seed.size}, expected {system.dimension}")
    # seeds must sit near their component: cap the correction distance
    p0, _ = _newton(system, seed, tol, max_move=max(8.0 * opts.initial_step, 0.25))
    t0 = _tangent_of(system, p0, None, tol)
    points = [p0]
    residuals = [float(np.linalg.norm(system.residual(p0)))]
    p, t = p0, t0
    h = opts.initial_step
    escaped = False
    closure_error = None
    for _step in range(opts.max_steps):
        predictor = p + h * t
        try:
            q, rn = _newton(system, predictor, tol, max_iter=8)
            ok = float(np.linalg.norm(q - predictor)) <= max(h, 1e3 * tol.newton_tol)
        except (NoConvergence, EvaluationFailure):
            q, rn, ok = None, None, False
        if ok:
            t_new = _tangent_of(system, q, t, tol)
            if float(t_new @ t) < 0.2:
                ok = False
        if not ok:
            h *= 0.5
            if h < opts.min_step:
                raise NoConvergence("corrector kept failing at the minimum step size")
            continue
        dist0 = float(np.linalg.norm(q - p0))
        if not escaped and dist0 > max(4.0 * opts.initial_step, 100.0 * tol.closure_tol):
            escaped = True
        if escaped and dist0 < 1.5 * h and float(t_new @ t0) > 0.9:
            try:
                closer, _ = _newton_aligned(system, q, p0, t0, tol)
                err = float(np.linalg.norm(closer - p0))
            except (NoConvergence, EvaluationFailure):
                err = math.inf
            if err < tol.closure_tol:
                closure_error = err
                break
        points.append(q)
        residuals.append(rn)
        p, t = q, t_new
        if float(np.linalg.norm(q - predictor)) < 0.1 * h:
            h = min(2.0 * h, opts.max_step)
    if closure_error is None:
        raise NotClosed(f"no closure within {opts.max_steps} steps")
    pts = np.asarray(points)
    seg = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    params = list(cum[:-1] / cum[-1])

    def resample(t_val: float) -> np.ndarray:
        u = t_val % 1.0
        ts = params + [1.0]
        i = int(np.searchsorted(ts, u, side="right")) - 1
        i = max(0, min(i, len(points) - 1))
        a = pts[i]
        b = pts[(i + 1) % len(points)]
        w = (u - ts[i]) / (ts[i + 1] - ts[i])
        out, _ = _newton(system, (1.0 - w) * a + w * b, tol)
        return out

    if stats is not None:
        stats["closure_error"] = closure_error
        stats["max_residual"] = max(residuals)
        stats["steps"] = len(points)
    return SampledLoop(pts, resample, params)


def suggest_seeds(
    spec,
    opts: TraceOptions | None = None,
    bounds: Sequence[tuple[float, float]] | None = None,
    per_axis: int = 5,
    dedup_radius: float = 0.25,
) -> list[np.ndarray]:
    """Coarse scan proposing seeds near the solution set.

    Candidates come from a grid over `bounds` (Euclidean domains, default
    [-2, 2] per axis) or from a fixed pseudo-random spread of directions
    (sphere domains and sections); each candidate is Newton-corrected with
    the same locality cap as a traced seed and kept when it lands.
    Completeness is NOT guaranteed, and nearby suggestions may still lie on
    one component: curating the list is the caller's responsibility.
    """
    opts = opts or TraceOptions()
    if isinstance(spec, SectionSpec):
        system = _section_system(spec)
        on_sphere = True
    else:
        system = _map_system(spec)
        on_sphere = spec.domain == "unit_sphere"
    dim = system.dimension
    if on_sphere:
        gen = np.random.default_rng(0)
        count = max(128, 16 * dim)
        candidates = gen.normal(size=(count, dim))
        candidates /= np.linalg.norm(candidates, axis=1)[:, None]
    else:
        if bounds is None:
            bounds = [(-2.0, 2.0)] * dim
        axes = [np.linspace(lo, hi, per_axis) for lo, hi in bounds]
        candidates = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    kept: list[np.ndarray] = []
    cap = max(8.0 * opts.initial_step, 0.25)
    for cand in candidates:
        try:
            p, _ = _newton(system, cand, opts.tolerances, max_move=cap)
        except (NoConvergence, EvaluationFailure):
            continue
        if all(np.linalg.norm(p - q) > dedup_radius for q in kept):
            kept.append(p)
    return kept


def trace_component(
    spec: MapSpec, seed: np.ndarray, opts: TraceOptions, stats: dict | None = None
) -> SampledLoop:
    """Trace the closed solution curve through the component nearest a seed.

    The seed is Newton-corrected onto the solution set (NoConvergence when
    that fails); the curve is then walked with an Euler predictor along the
    Jacobian kernel and a Gauss-Newton corrector, halving the step on
    corrector failure and doubling it after easy steps, until the walk
    returns to the start point with an aligned tangent. The returned loop
    resamples itself by re-running the corrector.
    """
    system = _map_system(spec)
    loop = _trace(system, seed, opts, stats)
    if spec.target == "sphere":
        x0 = spec.regular_value
        val = float(np.asarray(spec.evaluator(loop.points[0]), dtype=float) @ x0)
        if val <= 0.0:
            raise NoConvergence("seed converged to the preimage of the antipodal value")
    return loop


def induced_framing(
    spec: MapSpec, loop: SampledLoop, basis: np.ndarray | None = None
) -> NormalFraming:
    """Pull a fixed target-tangent basis back through the map's derivative.

    At every sample, field i is the minimum-norm solution of
    (constrained jacobian) . phi = b_i; it lies in the row space of the
    constrained Jacobian, hence is tangent to the domain manifold and
    orthogonal to the curve. A caller may supply a different orthonormal
    basis of the target tangent space (rows); the default is target_basis.
    """
    if spec.target == "sphere":
        B = target_basis(spec, np.asarray(spec.regular_value).size - 1)
        count = B.shape[0]
        src = B if basis is None else np.asarray(basis, dtype=float)
        # right-hand sides in the reduced target coordinates
        rhs = src @ B.T
    else:
        count = _frame_jacobian(spec, loop.points[0]).shape[0]
        rhs = np.eye(count) if basis is None else np.asarray(basis, dtype=float)

    def fields_at(p: np.ndarray) -> np.ndarray:
        J = _frame_jacobian(spec, p)
        try:
            return np.vstack([least_squares(J, rhs[i]) for i in range(count)])
        except RankDeficient as exc:
            raise Singular("rank drop of the map derivative along the curve") from exc

    stacked = [fields_at(loop.points[k]) for k in range(len(loop))]
    fields = [np.vstack([s[i] for s in stacked]) for i in range(count)]
    resample = None
    if loop.resample is not None:
        resample = lambda t: fields_at(loop.point(t))  # noqa: E731
    return NormalFraming(fields, resample)


def _frame_det(loop, middle, framing, ambient, k) -> float:
    """Sign-relevant determinant of the raw frame rows at sample k."""
    normals = [np.asarray(n(loop.points[k]), dtype=float) for n in ambient.manifold_normals]
    rows = normals + [middle] + list(framing.at_sample(k))
    return float(np.linalg.det(np.vstack(rows)))


def _oriented(loop, framing, ambient):
    """Reverse a traced loop when its induced frame is left-handed."""
    d = _frame_det(loop, loop.tangent_at_sample(0), framing, ambient, 0)
    if d > 0.0:
        return loop, framing
    return loop.reversed(), framing.reversed()


def _point_to_curve_distance(p: np.ndarray, b: SampledLoop) -> float:
    """Distance from a point to a loop, refined through the loop's resampler.

    Starts from the nearest stored sample and golden-sections the distance
    along the parameter; without a resampler the nearest sample distance is
    returned. Needed because sample-set distances between two traces of one
    curve are of the order of the step size, far above closure tolerances.
    """
    d = np.linalg.norm(b.points - p, axis=1)
    j = int(np.argmin(d))
    if b.resample is None:
        return float(d[j])
    gap = 2.0 / len(b)
    lo = b.params[j] - gap
    hi = b.params[j] + gap
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - phi * (hi - lo)
    x2 = lo + phi * (hi - lo)
    f1 = float(np.linalg.norm(b.point(x1) - p))
    f2 = float(np.linalg.norm(b.point(x2) - p))
    for _ in range(36):
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - phi * (hi - lo)
            f1 = float(np.linalg.norm(b.point(x1) - p))
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + phi * (hi - lo)
            f2 = float(np.linalg.norm(b.point(x2) - p))
    return min(f1, f2, float(d[j]))


def hausdorff_distance(a: SampledLoop, b: SampledLoop, probes: int = 16) -> float:
    """Approximate symmetric Hausdorff distance between two loops.

    Probes a spread of samples on each loop against the other loop's curve
    (resample-refined when available, nearest sample otherwise).
    """

    def one_sided(src: SampledLoop, dst: SampledLoop) -> float:
        stride = max(1, len(src) // probes)
        return max(
            _point_to_curve_distance(src.points[k], dst)
            for k in range(0, len(src), stride)
        )

    return max(one_sided(a, b), one_sided(b, a))


def _check_distinct(loops: Sequence[SampledLoop], tol: Tolerances):
    for i in range(len(loops)):
        for j in range(i + 1, len(loops)):
            if hausdorff_distance(loops[i], loops[j]) <= 10.0 * tol.closure_tol:
                raise DuplicateComponent(f"seeds {i} and {j} traced the same component")


def _tolerances_dict(tol: Tolerances) -> dict:
    return {
        "ortho_tol": tol.ortho_tol,
        "newton_tol": tol.newton_tol,
        "closure_tol": tol.closure_tol,
        "lift_angle_max": tol.lift_angle_max,
    }


def kappa_of_map(
    spec: MapSpec, opts: TraceOptions, ambient: AmbientPresentation
) -> InvariantReport:
    """Trace all seeds, frame the preimage circles, and report their indices.

    Seeds whose correction fails to converge are skipped (an empty preimage
    contributes nothing); two seeds tracing one component raise
    DuplicateComponent. The report's odd-index component count mod 2 equals
    kappa by construction.
    """
    tol = opts.tolerances
    want_normals = 1 if spec.domain == "unit_sphere" else 0
    if len(ambient.manifold_normals) != want_normals or ambient.dimension != spec.dimension:
        raise AmbientMismatch("ambient presentation does not match the map's domain")
    loops = []
    trace_stats = []
    skipped = 0
    for seed in opts.seeds:
        stats: dict = {}
        try:
            loops.append(trace_component(spec, np.asarray(seed, dtype=float), opts, stats))
            trace_stats.append(stats)
        except NoConvergence:
            skipped += 1
    _check_distinct(loops, tol)
    components = []
    for loop in loops:
        framing = induced_framing(spec, loop)
        loop, framing = _oriented(loop, framing, ambient)
        components.append((loop, framing))
    report = invariant_report(FramedLink(components, ambient), tol)
    report.diagnostics["max_residual"] = max(
        (s["max_residual"] for s in trace_stats), default=None
    )
    report.diagnostics["closure_errors"] = [s["closure_error"] for s in trace_stats]
    report.diagnostics["seeds_skipped"] = skipped
    return report


def transport_closed_frame(
    loop: SampledLoop,
    normals_of_M: Sequence[Callable[[np.ndarray], np.ndarray]],
    tol: Tolerances = DEFAULT_TOL,
) -> NormalFraming:
    """Closed orthonormal frame of the curve's normal space inside the manifold.

    The frame starts from coordinate projections, is carried along the loop
    by projection transport (project the previous frame onto the current
    normal space and re-orthonormalize), and is closed by distributing the
    inverse of the resulting holonomy along the loop via the principal
    logarithm of the holonomy rotation.
    """
    k = len(loop)
    dim = loop.dimension
    count = dim - len(normals_of_M) - 1
    if count < 1:
        raise ValueError("the curve has no normal directions inside the manifold")

    def project(vecs: Sequence[np.ndarray], p: np.ndarray, tangent: np.ndarray):
        killed = [np.asarray(n(p), dtype=float) for n in normals_of_M] + [tangent]
        frame: list[np.ndarray] = []
        for v in vecs:
            w = np.asarray(v, dtype=float).copy()
            for _ in range(2):
                for q in killed:
                    w = w - (q @ w) * q
                for q in frame:
                    w = w - (q @ w) * q
            r = float(np.linalg.norm(w))
            if r < 1e-8:
                raise RankDeficient("normal space of the curve lost a dimension")
            frame.append(w / r)
        return frame

    def initial_frame(p: np.ndarray, tangent: np.ndarray):
        frame: list[np.ndarray] = []
        for i in range(dim):
            e = np.zeros(dim)
            e[i] = 1.0
            try:
                frame = project(frame + [e], p, tangent)
            except RankDeficient:
                continue
            if len(frame) == count:
                return frame
        raise RankDeficient("could not complete an initial normal frame")

    raw = [initial_frame(loop.points[0], loop.tangent_at_sample(0))]
    for i in range(1, k):
        raw.append(project(raw[i - 1], loop.points[i], loop.tangent_at_sample(i)))
    closed = project(raw[-1], loop.points[0], loop.tangent_at_sample(0))
    H = np.array([[float(a @ b) for b in raw[0]] for a in closed])
    if np.linalg.det(H) < 0.0:
        raise RankDeficient("transport around the loop reversed orientation")
    blocks = _principal_log_blocks(H)

    fields_stacked = []
    for i in range(k):
        C = _rotation_power(blocks, -loop.params[i])
        fields_stacked.append(C @ np.vstack(raw[i]))
    fields = [np.vstack([fs[i] for fs in fields_stacked]) for i in range(count)]
    resample = None
    if loop.resample is not None:
        params = list(loop.params)

        def resample(t_val: float) -> np.ndarray:
            u = t_val % 1.0
            ts = params + [1.0]
            i = int(np.searchsorted(ts, u, side="right")) - 1
            i = max(0, min(i, k - 1))
            stepped = project(raw[i], loop.point(u), loop.tangent(u))
            return _rotation_power(blocks, -u) @ np.vstack(stepped)

    return NormalFraming(fields, resample)


def _principal_log_blocks(H: np.ndarray):
    """Schur frame and plane angles of an SO(n) matrix (a log, up to full turns)."""
    T, Q = schur(H, output="real")
    n = H.shape[0]
    planes = []
    minus_ones = []
    i = 0
    while i < n:
        if i + 1 < n and abs(T[i + 1, i]) > 1e-10:
            planes.append((i, i + 1, math.atan2(T[i + 1, i], T[i, i])))
            i += 2
        else:
            if T[i, i] < -0.99:
                minus_ones.append(i)
            i += 1
    # det +1 forces -1 eigenvalues to come in pairs; join them as pi-planes.
    for a, b in zip(minus_ones[0::2], minus_ones[1::2]):
        planes.append((a, b, math.pi))
    return Q, planes


def _rotation_power(blocks, power: float) -> np.ndarray:
    Q, planes = blocks
    B = np.eye(Q.shape[0])
    for (a, b, theta) in planes:
        c = math.cos(power * theta)
        s = math.sin(power * theta)
        B[a, a] = c
        B[b, b] = c
        B[b, a] = s
        B[a, b] = -s
    return Q @ B @ Q.T


def _check_section_invariants(spec: SectionSpec, loop: SampledLoop):
    stride = max(1, len(loop) // 16)
    for idx in range(0, len(loop), stride):
        x = loop.points[idx]
        v = np.asarray(spec.splitting_field(x), dtype=float)
        w = np.asarray(spec.section(x), dtype=float)
        if abs(float(v @ v) - 1.0) > 1e-8 or abs(float(v @ x)) > 1e-8:
            raise ValidationError("splitting field must be a unit tangent field of the sphere")
        if abs(float(w @ x)) > 1e-6 or abs(float(w @ v)) > 1e-6:
            raise ValidationError(
                "section values must be tangent and orthogonal to the splitting field"
            )


def _section_derivative_fields(
    spec: SectionSpec, loop: SampledLoop, aux: NormalFraming
) -> NormalFraming:
    """dw applied to the auxiliary frame, projected into the bundle fibers."""

    def tau_at(x: np.ndarray, u_vectors) -> np.ndarray:
        v = np.asarray(spec.splitting_field(x), dtype=float)
        h = 1e-6 * (1.0 + float(np.linalg.norm(x)))
        out = []
        for u in u_vectors:
            if spec.jacobian is not None:
                d = np.asarray(spec.jacobian(x), dtype=float) @ u
            else:
                xp = x + h * u
                xm = x - h * u
                wp = np.asarray(spec.section(xp / np.linalg.norm(xp)), dtype=float)
                wm = np.asarray(spec.section(xm / np.linalg.norm(xm)), dtype=float)
                d = (wp - wm) / (2.0 * h)
            # at zeros of the section the covariant derivative is the plain
            # directional derivative projected into the fiber
            d = d - (d @ x) * x - (d @ v) * v
            out.append(d)
        return np.vstack(out)

    stacked = [tau_at(loop.points[i], aux.at_sample(i)) for i in range(len(loop))]
    fields = [np.vstack([s[i] for s in stacked]) for i in range(aux.count)]
    resample = None
    if loop.resample is not None and aux.resample is not None:
        resample = lambda t: tau_at(loop.point(t), aux.at(t))  # noqa: E731
    return NormalFraming(fields, resample)


def _section_term2_det(spec: SectionSpec, loop: SampledLoop, tau: NormalFraming, k: int) -> float:
    x = loop.points[k]
    radial = x / np.linalg.norm(x)
    v = np.asarray(spec.splitting_field(x), dtype=float)
    rows = [radial, v] + list(tau.at_sample(k))
    return float(np.linalg.det(np.vstack(rows)))


def _negate_field(framing: NormalFraming, index: int) -> NormalFraming:
    fields = [f.copy() for f in framing.fields]
    fields[index] = -fields[index]
    resample = None
    if framing.resample is not None:
        inner = framing.resample

        def resample(t):
            vals = np.asarray(inner(t), dtype=float).copy()
            vals[index] = -vals[index]
            return vals

    return NormalFraming(fields, resample)


def _assembled_loop(loop, middle_at_sample, framing, ambient, tol, middle_resample=None):
    """Rotation loop with rows [manifold normals, middle row, framing fields]."""
    samples = []
    for idx in range(len(loop)):
        samples.append(
            _assemble_frame(
                ambient,
                loop.points[idx],
                middle_at_sample(idx),
                framing.at_sample(idx),
                tol,
                where=f"sample {idx}",
            )
        )
    refiner = None
    if loop.resample is not None and framing.resample is not None and middle_resample is not None:

        def refiner(t: float) -> np.ndarray:
            return _assemble_frame(
                ambient,
                loop.point(t),
                middle_resample(t),
                framing.at(t),
                tol,
                where=f"parameter {t % 1.0:.6f}",
            )

    return RotationLoop(samples, refiner, list(loop.params))


def _component_section_index(spec, loop, ambient, tol, aux_twist_turns):
    def build(loop_):
        aux_ = transport_closed_frame(loop_, ambient.manifold_normals, tol)
        if aux_twist_turns:
            aux_ = twist_framing(loop_, aux_, aux_twist_turns)
        tau_ = _section_derivative_fields(spec, loop_, aux_)
        return aux_, tau_

    aux, tau = build(loop)
    try:
        orthonormalize(list(tau.at_sample(0)), tol)
    except RankDeficient as exc:
        raise NonTransverse("section derivative degenerates on the normal space") from exc
    d1 = _frame_det(loop, loop.tangent_at_sample(0), aux, ambient, 0)
    d2 = _section_term2_det(spec, loop, tau, 0)
    if d2 < 0.0:
        aux = _negate_field(aux, 0)
        tau = _negate_field(tau, 0)
        d1 = -d1
    if d1 < 0.0:
        loop = loop.reversed()
        aux, tau = build(loop)
        if _section_term2_det(spec, loop, tau, 0) < 0.0:
            aux = _negate_field(aux, 0)
            tau = _negate_field(tau, 0)
    stats: dict = {}
    term1 = _assembled_loop(
        loop,
        loop.tangent_at_sample,
        aux,
        ambient,
        tol,
        middle_resample=(loop.tangent if loop.resample is not None else None),
    )
    v_of = lambda p: np.asarray(spec.splitting_field(p), dtype=float)  # noqa: E731
    term2 = _assembled_loop(
        loop,
        lambda idx: v_of(loop.points[idx]),
        tau,
        ambient,
        tol,
        middle_resample=(
            (lambda t: v_of(loop.point(t))) if loop.resample is not None else None
        ),
    )
    bit = loop_class(term1, tol, stats) ^ loop_class(term2, tol, stats) ^ Z2(1)
    return bit, stats


def section_zero_loops(
    spec: SectionSpec, opts: TraceOptions, stats_out: list | None = None
) -> list[SampledLoop]:
    """Traced zero circles of the section, one per converging seed.

    Seeds whose correction diverges are skipped (recorded as a None entry
    in stats_out); seeds reaching one component twice raise
    DuplicateComponent.
    """
    system = _section_system(spec)
    loops = []
    for seed in opts.seeds:
        stats: dict = {}
        try:
            loops.append(_trace(system, np.asarray(seed, dtype=float), opts, stats))
            if stats_out is not None:
                stats_out.append(stats)
        except NoConvergence:
            if stats_out is not None:
                stats_out.append(None)
    _check_distinct(loops, opts.tolerances)
    return loops


def section_index(
    spec: SectionSpec,
    opts: TraceOptions,
    aux_twist_turns: int = 0,
) -> InvariantReport:
    """Degree of the v-complement bundle from the zero locus of the section.

    Traces the zeros of the section on the sphere; every zero circle
    contributes loop_class([position, tangent, aux]) xor
    loop_class([position, v, dw(aux)]) xor 1, and the degree is the xor
    over components (an empty zero locus gives 0).
    """
    tol = opts.tolerances
    all_stats: list = []
    loops = section_zero_loops(spec, opts, all_stats)
    trace_stats = [s for s in all_stats if s is not None]
    skipped = sum(1 for s in all_stats if s is None)
    ambient = sphere_ambient(spec.embedding_dimension)
    comps = []
    bits = []
    depth = 0
    for loop in loops:
        _check_section_invariants(spec, loop)
        bit, stats = _component_section_index(spec, loop, ambient, tol, aux_twist_turns)
        depth = max(depth, stats.get("max_depth", 0))
        bits.append(bit)
        comps.append(ComponentReport(int(bit), None, len(loop), loop.length()))
    total = _reduce(lambda a, b: a ^ b, bits, Z2(0))
    nonzero = Z2(sum(int(b) for b in bits) & 1)
    diagnostics = {
        "max_residual": max((s["max_residual"] for s in trace_stats), default=None),
        "closure_errors": [s["closure_error"] for s in trace_stats],
        "seeds_skipped": skipped,
        "refinement_depth": depth,
        "tolerances": _tolerances_dict(tol),
    }
    return InvariantReport(comps, total, nonzero, diagnostics)


def write_loop_csv(loop: SampledLoop, path: str):
    """One row per sample: parameter, then the point coordinates."""
    with open(path, "w", encoding="utf-8") as fh:
        cols = ",".join(f"x{i}" for i in range(loop.dimension))
        fh.write(f"t,{cols}\n")
        for t, p in zip(loop.params, loop.points):
            coords = ",".join(repr(float(c)) for c in p)
            fh.write(f"{t!r},{coords}\n")
