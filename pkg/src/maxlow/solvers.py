from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, LinearOperator, eigsh, splu

from maxlow.config import settings
from maxlow.errors import ConvergenceError, SolverError

logger = logging.getLogger(__name__)

MatrixLike = sparse.spmatrix | np.ndarray

INERTIA_DENSE_LIMIT = 3000


class Inertia(NamedTuple):
    positive: int
    negative: int
    zero: int


def _as_csc(matrix: MatrixLike) -> sparse.csc_matrix:
    return sparse.csc_matrix(matrix, dtype=float)


def _n_rows(constraint: MatrixLike | None) -> int:
    return 0 if constraint is None else int(constraint.shape[0])


def saddle_matrix(a: MatrixLike, constraint: MatrixLike | None) -> sparse.csc_matrix:
    """[[A, C^T], [C, 0]] with the rows of C as constraints."""
    if _n_rows(constraint) == 0:
        return _as_csc(a)
    c = sparse.csr_matrix(constraint, dtype=float)
    return sparse.bmat([[_as_csc(a), c.T], [c, None]], format="csc")


class Factorization:
    """Sparse LU factors with one step of iterative refinement per solve."""

    def __init__(self, matrix: MatrixLike, residual_tol: float | None = None) -> None:
        self.matrix = _as_csc(matrix)
        if self.matrix.shape[0] != self.matrix.shape[1]:
            raise SolverError(f"cannot factor a non-square matrix {self.matrix.shape}")
        self.residual_tol = (
            settings.solve_residual_tol if residual_tol is None else residual_tol
        )
        self.norm1 = float(abs(self.matrix).sum(axis=0).max()) if self.matrix.nnz else 0.0
        try:
            self._lu = splu(self.matrix)
        except RuntimeError as exc:
            raise SolverError(f"factorization failed: {exc}") from exc

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        x = self._lu.solve(rhs)
        x = x + self._lu.solve(rhs - self.matrix @ x)
        if not np.all(np.isfinite(x)):
            raise SolverError("solve produced non-finite values")
        residual = np.linalg.norm(self.matrix @ x - rhs)
        bound = self.residual_tol * (self.norm1 * np.linalg.norm(x) + np.linalg.norm(rhs))
        if residual > bound:
            raise SolverError(
                f"solve residual {residual:.3e} exceeds {bound:.3e}; matrix is near singular"
            )
        return x

    @cached_property
    def inertia(self) -> Inertia:
        """Signs of the eigenvalues of the symmetric matrix, from a dense LDL^T."""
        n = self.shape[0]
        if n > INERTIA_DENSE_LIMIT:
            raise SolverError(f"inertia is only computed up to n={INERTIA_DENSE_LIMIT}")
        _, d, _ = scipy.linalg.ldl(self.matrix.toarray())
        values = np.linalg.eigvalsh(d)
        cutoff = 1e-12 * max(float(np.abs(values).max(initial=0.0)), 1.0)
        return Inertia(
            positive=int((values > cutoff).sum()),
            negative=int((values < -cutoff).sum()),
            zero=int((np.abs(values) <= cutoff).sum()),
        )


class ConstrainedSolver:
    """Solves A x + C^T eta = b, C x = 0 and returns x."""

    def __init__(self, a: MatrixLike, constraint: MatrixLike | None = None) -> None:
        self.n = a.shape[0]
        self.m = _n_rows(constraint)
        self.factorization = Factorization(saddle_matrix(a, constraint))

    def __call__(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        if self.m == 0:
            return self.factorization.solve(rhs)
        padded = np.concatenate([rhs, np.zeros(self.m)])
        return self.factorization.solve(padded)[: self.n]


@dataclass(frozen=True)
class EigResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    iterations: int
    method: str


@dataclass(frozen=True)
class PowerResult:
    value: float
    vector: np.ndarray
    iterations: int
    residual: float
    method: str

    @property
    def upper(self) -> float:
        """Rayleigh quotient plus residual; some eigenvalue of the pencil lies below it."""
        return self.value + self.residual


def dense_constrained_eigs(
    a: MatrixLike, b: MatrixLike, constraint: MatrixLike | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """All eigenpairs of A x = mu B x on ker C by a null-space reduction."""
    a_dense = a.toarray() if sparse.issparse(a) else np.asarray(a, dtype=float)
    b_dense = b.toarray() if sparse.issparse(b) else np.asarray(b, dtype=float)
    n = a_dense.shape[0]
    if _n_rows(constraint) == 0:
        basis = np.eye(n)
    else:
        c_dense = (
            constraint.toarray() if sparse.issparse(constraint) else np.asarray(constraint)
        )
        basis = scipy.linalg.null_space(c_dense)
    if basis.shape[1] == 0:
        return np.empty(0), np.empty((n, 0))
    reduced_a = basis.T @ a_dense @ basis
    reduced_b = basis.T @ b_dense @ basis
    reduced_a = 0.5 * (reduced_a + reduced_a.T)
    reduced_b = 0.5 * (reduced_b + reduced_b.T)
    try:
        values, vectors = scipy.linalg.eigh(reduced_a, reduced_b)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"mass matrix is not definite on the constrained space: {exc}") from exc
    return values, basis @ vectors


def _constraint_rank(constraint: MatrixLike | None, n: int) -> int:
    m = _n_rows(constraint)
    if m == 0:
        return 0
    if n + m <= INERTIA_DENSE_LIMIT:
        dense = constraint.toarray() if sparse.issparse(constraint) else np.asarray(constraint)
        return int(np.linalg.matrix_rank(dense))
    return m


def _normalize_signs(vectors: np.ndarray) -> np.ndarray:
    for j in range(vectors.shape[1]):
        column = vectors[:, j]
        pivot = int(np.argmax(np.round(np.abs(column), 10)))
        if column[pivot] < 0:
            vectors[:, j] = -column
    return vectors


def _order(values: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    scale = max(float(np.abs(values).max(initial=0.0)), 1.0)

    def key(j: int) -> tuple:
        return (round(values[j] / scale, 9), tuple(np.round(vectors[:, j], 8).tolist()))

    return np.array(sorted(range(len(values)), key=key), dtype=np.int64)


def _constrained_residuals(
    a: MatrixLike,
    b: MatrixLike,
    constraint: MatrixLike | None,
    values: np.ndarray,
    vectors: np.ndarray,
) -> np.ndarray:
    residual = a @ vectors - (b @ vectors) * values
    scale = np.linalg.norm(b @ vectors, axis=0)
    if _n_rows(constraint):
        c = sparse.csr_matrix(constraint)
        gram = Factorization((c @ c.T).tocsc(), residual_tol=1e-6)
        multipliers = gram.solve(c @ residual)
        residual = residual - c.T @ multipliers
    return np.linalg.norm(residual, axis=0) / np.where(scale > 0, scale, 1.0)


def smallest_eigs_constrained(
    a: MatrixLike,
    b: MatrixLike,
    constraint: MatrixLike | None,
    k: int,
    tol: float | None = None,
    seed: int | None = None,
) -> EigResult:
    """k smallest eigenpairs of A x = mu B x subject to C x = 0.

    Large problems use shift-invert Lanczos at zero whose inverse is a
    prefactored saddle solve; small ones fall back to a dense reduction.
    Eigenvectors are B-orthonormal.
    """
    tol = settings.eig_tol if tol is None else tol
    seed = settings.seed if seed is None else seed
    if k < 1:
        raise SolverError("at least one eigenvalue must be requested")
    n = a.shape[0]
    available = n - _constraint_rank(constraint, n)
    if k > available:
        raise SolverError(
            f"requested {k} eigenvalues but the constrained space has dimension {available}"
        )

    if available <= settings.dense_threshold or k >= available - 1:
        values, vectors = dense_constrained_eigs(a, b, constraint)
        values, vectors = values[:k], vectors[:, :k]
        iterations, method = 0, "dense"
    else:
        solver = ConstrainedSolver(a, constraint)
        applications = 0

        def apply_inverse(x: np.ndarray) -> np.ndarray:
            nonlocal applications
            applications += 1
            return solver(x)

        operator = LinearOperator((n, n), matvec=apply_inverse, dtype=float)
        rng = np.random.default_rng(seed)
        start = solver(b @ rng.standard_normal(n))
        try:
            values, vectors = eigsh(
                sparse.csr_matrix(a),
                k=k,
                M=sparse.csr_matrix(b),
                sigma=0.0,
                which="LM",
                OPinv=operator,
                v0=start,
                tol=tol,
            )
        except (ArpackError, ArpackNoConvergence) as exc:
            raise SolverError(f"shift-invert Lanczos failed: {exc}") from exc
        iterations, method = applications, "shift-invert"

    norms = np.sqrt(np.einsum("ij,ij->j", vectors, b @ vectors))
    vectors = _normalize_signs(vectors / norms)
    order = _order(values, vectors)
    values, vectors = np.asarray(values)[order], vectors[:, order]
    residuals = _constrained_residuals(a, b, constraint, values, vectors)
    logger.debug(
        "constrained eigensolve",
        extra={"method": method, "n": n, "k": k, "residual": float(residuals.max())},
    )
    return EigResult(values, vectors, residuals, iterations, method)


def largest_eig_power(
    apply_q: Callable[[np.ndarray], np.ndarray],
    mass: MatrixLike,
    constraint: MatrixLike | None = None,
    tol: float | None = None,
    max_iter: int | None = None,
    seed: int | None = None,
) -> PowerResult:
    """Largest mu of Q y = mu M y on ker C by projected power iteration.

    Each step maps y to the M-orthogonal projection of M^-1 Q y onto ker C
    with one saddle solve. The iteration stops once the Rayleigh quotient
    stagnates to ``tol`` and the M-norm residual is below ``sqrt(tol)`` times
    the quotient; :attr:`PowerResult.upper` adds that residual back.
    """
    tol = settings.power_tol if tol is None else tol
    max_iter = settings.power_max_iter if max_iter is None else max_iter
    seed = settings.seed if seed is None else seed
    residual_tol = np.sqrt(tol)
    project = ConstrainedSolver(mass, constraint)
    n = mass.shape[0]

    y = project(mass @ np.random.default_rng(seed).standard_normal(n))
    norm = np.sqrt(y @ (mass @ y))
    if norm == 0.0:
        raise SolverError("the constrained space is empty")
    y /= norm

    previous = None
    value = 0.0
    residual = np.inf
    for iteration in range(1, max_iter + 1):
        q = apply_q(y)
        value = float(y @ q)
        image = project(q)
        difference = image - value * y
        residual = float(np.sqrt(max(difference @ (mass @ difference), 0.0)))
        if value <= 0.0 and np.linalg.norm(image) == 0.0:
            return PowerResult(0.0, y, iteration, 0.0, "power")
        stagnated = previous is not None and abs(value - previous) <= tol * abs(value)
        if stagnated and residual <= residual_tol * abs(value):
            return PowerResult(value, y, iteration, residual, "power")
        previous = value
        norm = np.sqrt(image @ (mass @ image))
        if norm == 0.0:
            return PowerResult(value, y, iteration, residual, "power")
        y = image / norm
    raise ConvergenceError(
        "power iteration did not converge",
        last_value=value,
        residual=residual,
        iterations=max_iter,
    )


def largest_eig_lanczos(
    apply_q: Callable[[np.ndarray], np.ndarray],
    mass: MatrixLike,
    constraint: MatrixLike | None = None,
    tol: float | None = None,
    seed: int | None = None,
) -> PowerResult:
    """Same contract as :func:`largest_eig_power` through ARPACK in M-inner-product mode.

    ARPACK runs on the pencil (P^T Q P, M) over the full space, P the
    M-orthogonal projector onto ker C; off ker C that pencil is zero, so its
    largest eigenvalue is the constrained one.
    """
    tol = settings.power_tol if tol is None else tol
    seed = settings.seed if seed is None else seed
    project = ConstrainedSolver(mass, constraint)
    mass_factor = Factorization(mass)
    n = mass.shape[0]
    start = project(mass @ np.random.default_rng(seed).standard_normal(n))

    def apply_projected(x: np.ndarray) -> np.ndarray:
        return mass @ project(apply_q(project(mass @ x)))

    try:
        _, vectors = eigsh(
            LinearOperator((n, n), matvec=apply_projected, dtype=float),
            k=1,
            M=sparse.csr_matrix(mass),
            Minv=LinearOperator((n, n), matvec=mass_factor.solve, dtype=float),
            which="LA",
            v0=start,
            tol=tol,
        )
    except (ArpackError, ArpackNoConvergence) as exc:
        raise ConvergenceError(f"Lanczos iteration failed: {exc}") from exc
    y = project(mass @ vectors[:, 0])
    y /= np.sqrt(y @ (mass @ y))
    q = apply_q(y)
    value = float(y @ q)
    difference = project(q) - value * y
    residual = float(np.sqrt(max(difference @ (mass @ difference), 0.0)))
    return PowerResult(value, y, 0, residual, "lanczos")


def rank_one_max_eig(
    ell: np.ndarray, b: MatrixLike, constraint: MatrixLike | None = None
) -> float:
    """max (l^T x)^2 / (x^T B x) over ker C, as l^T w with B w = l constrained."""
    ell = np.asarray(ell, dtype=float)
    if not np.any(ell):
        return 0.0
    w = ConstrainedSolver(b, constraint)(ell)
    return max(float(ell @ w), 0.0)
