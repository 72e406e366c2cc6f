"""Small dense linear algebra used everywhere else.

Everything here works on plain float64 numpy arrays (1-d vectors, 2-d
matrices) at desk scale (dimension <= 12). Orthonormalization is modified
Gram-Schmidt with one re-orthogonalization pass, which is plenty stable at
these sizes; least squares and kernel extraction are built on top of it so
rank decisions all go through the same tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import EvaluationFailure, RankDeficient


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds shared by the whole pipeline.

    ortho_tol: residual norm below which a vector counts as dependent.
    newton_tol: corrector residual accepted as "on the solution set".
    closure_tol: distance at which a traced loop counts as closed.
    lift_angle_max: largest per-step rotation angle accepted while lifting.
    """

    ortho_tol: float = 1e-10
    newton_tol: float = 1e-10
    closure_tol: float = 1e-6
    lift_angle_max: float = math.pi / 4

    def __post_init__(self):
        for name in ("ortho_tol", "newton_tol", "closure_tol", "lift_angle_max"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if not self.lift_angle_max < math.pi / 2:
            raise ValueError("lift_angle_max must be below pi/2")


DEFAULT_TOL = Tolerances()


def _as_vec(v) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.ndim != 1 or a.size < 1:
        raise ValueError("expected a 1-d vector")
    if not np.all(np.isfinite(a)):
        raise ValueError("vector has non-finite entries")
    return a


def _mgs(vectors: Sequence[np.ndarray], tol: float, drop_dependent: bool = False):
    """Modified Gram-Schmidt with one re-orthogonalization pass.

    Returns (basis, coeffs, kept) where basis[j] are orthonormal,
    vectors[i] = sum_j coeffs[i][j] * basis[j] for every kept index i, and
    kept lists the input indices that produced a basis vector. Dependent
    inputs either raise RankDeficient or, with drop_dependent, are skipped
    (their coefficient rows are still recorded).
    """
    basis: list[np.ndarray] = []
    coeffs: list[list[float]] = []
    kept: list[int] = []
    for i, v in enumerate(vectors):
        w = _as_vec(v).copy()
        row = [0.0] * len(basis)
        for _pass in range(2):
            for j, q in enumerate(basis):
                c = float(q @ w)
                w -= c * q
                row[j] += c
        r = float(np.linalg.norm(w))
        coeffs.append(row)
        if r < tol:
            if drop_dependent:
                continue
            raise RankDeficient(
                f"vector {i} is dependent on its predecessors (residual {r:.3e})"
            )
        basis.append(w / r)
        row.append(r)
        kept.append(i)
    return basis, coeffs, kept


def orthonormalize(vectors: Sequence[np.ndarray], tol: Tolerances = DEFAULT_TOL) -> list[np.ndarray]:
    """Orthonormalize an ordered vector set, preserving order and orientation.

    Each output keeps a positive inner product with its input after the
    preceding directions are projected out. Raises RankDeficient when a
    residual drops below ortho_tol.
    """
    vecs = [_as_vec(v) for v in vectors]
    if not vecs:
        return []
    dim = vecs[0].size
    if any(v.size != dim for v in vecs):
        raise ValueError("vectors must share one dimension")
    if len(vecs) > dim:
        raise RankDeficient(f"{len(vecs)} vectors cannot be independent in R^{dim}")
    basis, _, _ = _mgs(vecs, tol.ortho_tol)
    return basis


def least_squares(A: np.ndarray, b: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Minimum-norm solution of A x = b for a full-row-rank A.

    Uses the Gram-Schmidt factorization A = L Q (L lower triangular, Q rows
    orthonormal): forward-substitute L c = b, then x = Q^T c, which lies in
    the row space and therefore has minimal norm. Raises RankDeficient when
    the rows are dependent within ortho_tol.
    """
    A = np.asarray(A, dtype=float)
    b = _as_vec(b)
    if A.ndim != 2:
        raise ValueError("A must be a matrix")
    k, _ = A.shape
    if b.size != k:
        raise ValueError("right-hand side length must match the row count")
    basis, coeffs, _ = _mgs(list(A), tol.ortho_tol)
    c = np.zeros(k)
    for i in range(k):
        s = b[i] - sum(coeffs[i][j] * c[j] for j in range(len(coeffs[i]) - 1))
        c[i] = s / coeffs[i][-1]
    x = np.zeros(A.shape[1])
    for j, q in enumerate(basis):
        x += c[j] * q
    return x


def kernel_direction(
    J: np.ndarray,
    previous: np.ndarray | None = None,
    tol: Tolerances = DEFAULT_TOL,
) -> np.ndarray:
    """Unit vector spanning the one-dimensional kernel of J.

    Rows of J may be dependent (they are dropped); the kernel must end up
    one-dimensional or RankDeficient is raised. The sign follows `previous`
    when given, otherwise the first coordinate larger than ortho_tol in
    magnitude is made positive.
    """
    J = np.asarray(J, dtype=float)
    if J.ndim != 2:
        raise ValueError("J must be a matrix")
    n = J.shape[1]
    basis, _, _ = _mgs(list(J), tol.ortho_tol, drop_dependent=True)
    rank = len(basis)
    if n - rank != 1:
        raise RankDeficient(f"kernel dimension is {n - rank}, expected 1")
    # Complete the row basis: take the coordinate direction with the largest
    # residual, which is the best-conditioned completion.
    best = None
    best_norm = 0.0
    for i in range(n):
        w = np.zeros(n)
        w[i] = 1.0
        for _pass in range(2):
            for q in basis:
                w -= (q @ w) * q
        r = float(np.linalg.norm(w))
        if r > best_norm:
            best_norm = r
            best = w
    t = best / best_norm
    if previous is not None:
        prev = _as_vec(previous)
        d = float(t @ prev)
        if d < 0.0:
            t = -t
        if d != 0.0:
            return t
    for x in t:
        if abs(x) > tol.ortho_tol:
            if x < 0.0:
                t = -t
            break
    return t


def jacobian_fd(
    f: Callable[[np.ndarray], np.ndarray],
    p: np.ndarray,
    h: float | None = None,
) -> np.ndarray:
    """Central-difference Jacobian of f at p; entry (i, j) = df_i/dx_j.

    The default step is 1e-6 * (1 + |p|). Analytic Jacobians, when a caller
    has them, should be preferred; this is the fallback.
    """
    p = _as_vec(p)
    if h is None:
        h = 1e-6 * (1.0 + float(np.linalg.norm(p)))
    if not h > 0.0:
        raise ValueError("step h must be positive")
    cols = []
    for j in range(p.size):
        e = np.zeros(p.size)
        e[j] = h
        try:
            fp = np.asarray(f(p + e), dtype=float)
            fm = np.asarray(f(p - e), dtype=float)
        except Exception as exc:  # noqa: BLE001 - wrap into a typed failure
            raise EvaluationFailure(f"map evaluation failed near {p!r}") from exc
        cols.append((fp - fm) / (2.0 * h))
    return np.column_stack(cols) if cols else np.zeros((0, 0))
