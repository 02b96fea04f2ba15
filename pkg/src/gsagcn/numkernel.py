"""Dense float64 numeric kernels used by every other module.

A "Mat" is a plain two-dimensional float64 numpy array.  All public
operations validate shapes, never mutate their inputs, and return
freshly computed arrays.  Products and factorizations are delegated to
BLAS/LAPACK; the spectral estimators are plain power iterations whose
results carry their own convergence metadata.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .exceptions import ParameterError, ShapeError, SingularMatrixError

Mat = np.ndarray

# Symmetry slack for operations that require a symmetric input.  Inputs
# further than this from their transpose are rejected rather than
# silently symmetrized.
SYMMETRY_ATOL = 1e-10


@dataclass(frozen=True)
class SpectralEstimate:
    """Result of an iterative spectral computation.

    value      -- the estimated quantity (non-negative)
    iterations -- matrix applications consumed, including restarts
    tolerance  -- relative stopping tolerance that was requested
    converged  -- whether the stopping rule fired before the cap
    """

    value: float
    iterations: int
    tolerance: float
    converged: bool


def as_mat(values) -> Mat:
    """Coerce ``values`` to a finite 2-D float64 matrix."""
    m = np.asarray(values, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got ndim={m.ndim}")
    if not np.isfinite(m).all():
        raise ParameterError("matrix contains NaN or Inf entries")
    return m


def matmul(a: Mat, b: Mat) -> Mat:
    """Matrix product with explicit shape validation."""
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError("matmul operands must be 2-D")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def row_softmax(s: Mat) -> Mat:
    """Row-wise softmax, stabilized by subtracting each row's maximum.

    Entries equal to -inf are treated as masked-out slots and map to
    exactly 0.0, which is what per-graph attention masking relies on.
    A row that is entirely -inf has no finite maximum and is rejected.
    """
    if s.ndim != 2:
        raise ShapeError("row_softmax expects a 2-D matrix")
    if np.isnan(s).any() or np.isposinf(s).any():
        raise ParameterError("row_softmax input must be free of NaN and +inf")
    row_max = np.max(s, axis=1, keepdims=True)
    if np.isneginf(row_max).any():
        raise ParameterError("row_softmax: a row is entirely masked (-inf)")
    z = np.exp(s - row_max)
    return z / np.sum(z, axis=1, keepdims=True)


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def max_singular_value(
    m: Mat, tol: float = 1e-12, max_iters: int = 10_000
) -> SpectralEstimate:
    """Largest singular value of ``m`` by power iteration on m^T m.

    Starts from the normalized all-ones vector.  After the estimate
    stabilizes, one seeded random perturbation round guards against a
    start vector that is (numerically) orthogonal to the top singular
    subspace; if the perturbed run finds a larger value, it wins.
    """
    if m.ndim != 2:
        raise ShapeError("max_singular_value expects a 2-D matrix")
    if tol <= 0:
        raise ParameterError("tolerance must be positive")
    if max_iters < 1:
        raise ParameterError("max_iters must be at least 1")
    if not np.any(m):
        raise ParameterError("max_singular_value is undefined for the zero matrix")

    total_iters = 0

    def run(v0: np.ndarray, budget: int) -> tuple[float, np.ndarray, bool]:
        nonlocal total_iters
        v = _unit(v0)
        est = 0.0
        for _ in range(budget):
            u = m @ v
            total_iters += 1
            sigma = np.linalg.norm(u)
            if sigma == 0.0:
                # v fell into the null space; nudge it back out.
                v = _unit(v + 1e-8)
                continue
            converged = abs(sigma - est) <= tol * max(sigma, np.finfo(float).tiny)
            est = sigma
            v = _unit(m.T @ u)
            if converged:
                return est, v, True
        return est, v, False

    v0 = np.ones(m.shape[1])
    est, v, ok = run(v0, max_iters)

    # Perturbation round: detect a stalled iteration that locked onto a
    # lower singular direction.
    if ok and total_iters < max_iters:
        rng = np.random.default_rng(0x5EED)
        v_pert = _unit(v + 0.05 * rng.standard_normal(m.shape[1]))
        est2, _, ok2 = run(v_pert, max_iters - total_iters)
        if ok2 and est2 > est * (1.0 + 10.0 * tol):
            est, ok = est2, ok2

    return SpectralEstimate(
        value=float(est), iterations=total_iters, tolerance=tol, converged=ok
    )


def sym_eig_extreme(m: Mat) -> tuple[float, float]:
    """(smallest, largest) eigenvalue of a symmetric matrix.

    The input must be square and symmetric to within ``SYMMETRY_ATOL``;
    anything further off is rejected rather than symmetrized.
    """
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"sym_eig_extreme expects a square matrix, got {m.shape}")
    if m.shape[0] == 0:
        raise ShapeError("sym_eig_extreme expects a non-empty matrix")
    if np.max(np.abs(m - m.T)) > SYMMETRY_ATOL:
        raise ParameterError("matrix is not symmetric to within 1e-10")
    w = np.linalg.eigvalsh(m)
    return float(w[0]), float(w[-1])


def solve_spd(a: Mat, b: Mat) -> Mat:
    """Solve a x = b for symmetric positive definite ``a`` via Cholesky.

    ``b`` may have any number of right-hand-side columns.  A
    non-positive pivot aborts with :class:`SingularMatrixError` naming
    the pivot index, so near-semidefinite inputs fail loudly instead of
    returning garbage.
    """
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"solve_spd expects a square matrix, got {a.shape}")
    if b.ndim != 2 or b.shape[0] != a.shape[0]:
        raise ShapeError(f"right-hand side {b.shape} does not match {a.shape}")
    if np.max(np.abs(a - a.T)) > SYMMETRY_ATOL:
        raise ParameterError("matrix is not symmetric to within 1e-10")
    c, info = lapack.dpotrf(a, lower=1)
    if info > 0:
        raise SingularMatrixError(pivot=int(info))
    if info < 0:  # pragma: no cover - would indicate an internal bug
        raise RuntimeError(f"dpotrf: illegal argument {-info}")
    x, info = lapack.dpotrs(c, b, lower=1)
    if info != 0:  # pragma: no cover
        raise RuntimeError(f"dpotrs failed with info={info}")
    return np.ascontiguousarray(x)
