"""Sparse symmetric linear algebra and the shift-invert Lanczos solver.

The pencil solver runs Lanczos on (A - sigma B)^-1 B in the B
semi-inner product with full reorthogonalization; inner systems are
solved by conjugate gradients preconditioned with a level-of-fill
incomplete Cholesky factorization.  Ritz values theta convert to pencil
eigenvalues through lambda = sigma + 1/theta, and near-zero theta are
discarded as the infinite eigenvalues induced by a singular B.
"""

import numpy as np
import scipy.linalg
import scipy.sparse

from . import _kernels
from .errors import FactorizationError, NotConvergedError, SolverStalledError

_SYM_RTOL = 1e-14
_BREAKDOWN_TOL = 1e-14
_INFINITE_THETA_RTOL = 1e-10


class SparseSymMatrix:
    """Symmetric sparse matrix in CSR layout with both halves stored."""

    def __init__(self, indptr, indices, data, check=True):
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int32)
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self.n = len(self.indptr) - 1
        if check:
            self._check_symmetric()

    def _check_symmetric(self):
        s = self.to_scipy()
        gap = abs(s - s.T)
        if gap.nnz:
            scale = max(np.abs(self.data).max(), 1e-300)
            if gap.max() > _SYM_RTOL * scale:
                raise ValueError("matrix is not symmetric")

    @classmethod
    def from_scipy(cls, mat, symmetrize=False, check=True):
        mat = scipy.sparse.csr_matrix(mat)
        if symmetrize:
            mat = (mat + mat.T) * 0.5
            check = False
        mat.sum_duplicates()
        mat.sort_indices()
        return cls(mat.indptr, mat.indices, mat.data, check=check)

    @classmethod
    def from_dense(cls, arr):
        return cls.from_scipy(scipy.sparse.csr_matrix(np.asarray(arr, float)))

    @classmethod
    def identity(cls, n):
        return cls.from_scipy(scipy.sparse.identity(n, format="csr"), check=False)

    def to_scipy(self):
        return scipy.sparse.csr_matrix(
            (self.data, self.indices, self.indptr), shape=(self.n, self.n)
        )

    def to_dense(self):
        return self.to_scipy().toarray()

    def diagonal(self):
        return self.to_scipy().diagonal()

    @property
    def nnz(self):
        return len(self.data)

    def matvec(self, x):
        x = np.asarray(x, float)
        if x.ndim == 2 and x.shape[0] == self.n:
            return self.to_scipy() @ x
        if x.shape != (self.n,):
            raise ValueError(f"vector has shape {x.shape}, matrix is {self.n}x{self.n}")
        return _kernels.csr_matvec(self.indptr, self.indices, self.data, x)

    __matmul__ = matvec

    def __add__(self, other):
        return SparseSymMatrix.from_scipy(
            self.to_scipy() + other.to_scipy(), check=False
        )

    def scaled_sum(self, other, factor):
        """self + factor * other."""
        return SparseSymMatrix.from_scipy(
            self.to_scipy() + factor * other.to_scipy(), check=False
        )


def spmv(A, x):
    """Matrix-vector product y = A x."""
    return A.matvec(x)


class ICPreconditioner:
    """Incomplete Cholesky factor; callable as z = M(r)."""

    def __init__(self, L_indptr, L_indices, L_data, fill_level, shift):
        self.L_indptr = L_indptr
        self.L_indices = L_indices
        self.L_data = L_data
        self.fill_level = fill_level
        self.shift = shift

    @property
    def nnz(self):
        return len(self.L_data)

    def __call__(self, r):
        y = _kernels.solve_lower(self.L_indptr, self.L_indices, self.L_data, r)
        return _kernels.solve_lower_transpose(
            self.L_indptr, self.L_indices, self.L_data, y
        )


def ic_factorize(A, fill_level=3):
    """Level-of-fill incomplete Cholesky IC(fill_level).

    On a nonpositive pivot the factorization restarts on A + alpha I,
    doubling alpha from 1e-8 max|A_ii|; thirty failed shifts raise
    FactorizationError.
    """
    if not isinstance(A, SparseSymMatrix):
        raise ValueError("ic_factorize requires a SparseSymMatrix")
    if not 0 <= fill_level <= 14:
        raise ValueError("fill_level must be in 0..14")
    L_indptr, L_indices = _kernels.ic_symbolic(A.n, A.indptr, A.indices, fill_level)
    shift = 0.0
    L_data, fail = _kernels.ic_numeric(
        A.indptr, A.indices, A.data, L_indptr, L_indices, shift
    )
    if fail >= 0:
        maxdiag = float(np.abs(A.diagonal()).max()) if A.n else 0.0
        shift = 1e-8 * (maxdiag if maxdiag > 0 else 1.0)
        for _ in range(30):
            L_data, fail = _kernels.ic_numeric(
                A.indptr, A.indices, A.data, L_indptr, L_indices, shift
            )
            if fail < 0:
                break
            shift *= 2.0
        else:
            raise FactorizationError(
                f"incomplete Cholesky broke down at row {fail} "
                f"after 30 diagonal shifts (last alpha {shift:.3e})"
            )
    return ICPreconditioner(L_indptr, L_indices, L_data, fill_level, shift)


def _as_operator(A):
    return A.matvec if isinstance(A, SparseSymMatrix) else A


def cg_solve(A, b, tol=1e-11, precond=None, x0=None, max_iter=None, info=None):
    """Preconditioned conjugate gradients to a relative residual.

    Returns x with ||A x - b|| <= tol ||b|| (verified on the true
    residual).  Raises SolverStalledError after 10 N iterations.
    """
    op = _as_operator(A)
    b = np.asarray(b, float)
    n = len(b)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        if info is not None:
            info.update(iterations=0, residual=0.0)
        return np.zeros(n)
    if max_iter is None:
        max_iter = 10 * n
    x = np.zeros(n) if x0 is None else np.array(x0, float)
    r = b - op(x) if x0 is not None else b.copy()
    z = precond(r) if precond is not None else r
    p = z.copy()
    rz = float(r @ z)
    iterations = 0
    while iterations < max_iter:
        Ap = op(p)
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            raise SolverStalledError(
                "operator is not positive definite on the Krylov space",
                residual=float(np.linalg.norm(r)) / bnorm,
                iterations=iterations,
            )
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        iterations += 1
        if np.linalg.norm(r) <= tol * bnorm:
            true_r = b - op(x)
            true_norm = float(np.linalg.norm(true_r))
            if true_norm <= tol * bnorm:
                if info is not None:
                    info.update(iterations=iterations, residual=true_norm / bnorm)
                return x
            r = true_r  # recurrence drifted; continue on the true residual
            z = precond(r) if precond is not None else r
            p = z.copy()
            rz = float(r @ z)
            continue
        z = precond(r) if precond is not None else r
        rz_next = float(r @ z)
        p = z + (rz_next / rz) * p
        rz = rz_next
    raise SolverStalledError(
        f"CG did not reach tol={tol:g} within {max_iter} iterations",
        residual=float(np.linalg.norm(b - op(x))) / bnorm,
        iterations=iterations,
    )


class EigenPair:
    """Eigenvalue, eigenvector and residual metadata of a pencil mode."""

    def __init__(self, eigenvalue, vector, algebraic_residual, functional_residual,
                 converged=True):
        self.eigenvalue = eigenvalue
        self.vector = vector
        self.algebraic_residual = algebraic_residual
        self.functional_residual = functional_residual
        self.converged = converged

    def __repr__(self):
        return (
            f"EigenPair({self.eigenvalue:.6g}, "
            f"alg={self.algebraic_residual:.2e}, "
            f"fun={self.functional_residual:.2e})"
        )


def functional_residual(A, B, pair, mass=None):
    """Pencil residual ||A U - lambda B U|| / ||U||.

    Euclidean norms by default (coefficient-space identification); pass
    ``mass`` for the mass-weighted variant.
    """
    u = pair.vector
    r = (A @ u) - pair.eigenvalue * (B @ u)
    if mass is None:
        return float(np.linalg.norm(r) / np.linalg.norm(u))
    return float(np.sqrt(max(r @ (mass @ r), 0.0) / (u @ (mass @ u))))


class _LanczosState:
    """Growing B-orthonormal basis with cached capacity."""

    def __init__(self, n):
        self.q = np.zeros((n, 64))
        self.j = 0

    def append(self, v):
        if self.j == self.q.shape[1]:
            grown = np.zeros((self.q.shape[0], 2 * self.q.shape[1]))
            grown[:, : self.j] = self.q
            self.q = grown
        self.q[:, self.j] = v
        self.j += 1

    @property
    def basis(self):
        return self.q[:, : self.j]


def lanczos_shift_invert(A, B, nev, sigma=-1.0, tol=1e-10, seed=0, fill_level=3,
                         cg_tol=1e-11, mass=None, max_iter=None, return_info=False):
    """Smallest finite eigenvalues of the pencil A U = lambda B U.

    A and B must be symmetric positive semi-definite with sigma < 0 so
    that A - sigma B is positive definite.  Vectors are normalized to
    U^T mass U = 1 (``mass`` defaults to B).  Raises NotConvergedError
    with partial, flagged results if the iteration cap is hit; returns
    fewer than ``nev`` pairs only when the pencil has fewer finite
    modes.
    """
    if A.n != B.n:
        raise ValueError("pencil matrices differ in size")
    if sigma >= 0.0:
        raise ValueError("shift must be negative so A - sigma B is definite")
    n = A.n
    shifted = A.scaled_sum(B, -sigma)
    precond = ic_factorize(shifted, fill_level)
    cg_stats = {"max_residual": 0.0, "max_iterations": 0, "solves": 0}

    def op(v):
        local = {}
        x = cg_solve(shifted, B @ v, tol=cg_tol, precond=precond, info=local)
        cg_stats["max_residual"] = max(cg_stats["max_residual"], local["residual"])
        cg_stats["max_iterations"] = max(cg_stats["max_iterations"], local["iterations"])
        cg_stats["solves"] += 1
        return x

    rng = np.random.default_rng(seed)

    def b_norm(v):
        return float(np.sqrt(max(v @ (B @ v), 0.0)))

    def fresh_vector(state):
        # random start purified through the operator, B-orthogonal to the basis
        for _ in range(3):
            v = op(rng.standard_normal(n))
            if state.j:
                bv = B @ v
                v = v - state.basis @ (state.basis.T @ bv)
                bv = B @ v
                v = v - state.basis @ (state.basis.T @ bv)
            nrm = b_norm(v)
            if nrm > _BREAKDOWN_TOL:
                return v / nrm
        return None

    if max_iter is None:
        max_iter = max(int(5 * nev * np.ceil(np.sqrt(n))), 2 * nev + 10)

    state = _LanczosState(n)
    alphas, betas = [], []
    restarts = 0
    drift = 0.0
    est_factor = 0.1

    v = fresh_vector(state)
    if v is None:
        raise NotConvergedError("start vector has zero B-norm; B may be zero")
    state.append(v)

    pairs = None
    exhausted = False
    while True:
        j = state.j
        q = state.q[:, j - 1]
        w = op(q)
        if betas and betas[-1] != 0.0:
            w -= betas[-1] * state.q[:, j - 2]
        alphas.append(float(w @ (B @ q)))
        w -= alphas[-1] * q
        basis = state.basis
        for _ in range(2):  # full reorthogonalization, two Gram-Schmidt passes
            w -= basis @ (basis.T @ (B @ w))
        beta = b_norm(w)

        theta, s_mat = scipy.linalg.eigh_tridiagonal(
            np.asarray(alphas), np.asarray(betas)
        )
        cutoff = _INFINITE_THETA_RTOL * max(np.abs(theta).max(), 1e-300)
        finite = np.flatnonzero(np.abs(theta) > cutoff)
        finite = finite[np.argsort(-theta[finite])]
        take = finite[: min(nev, len(finite))]
        estimates = np.abs(beta * s_mat[-1, take])

        done = len(take) == nev and np.all(estimates <= est_factor * tol)
        if done or j == n:
            candidate = _extract_pairs(
                A, B, op, state.basis, s_mat, theta, take, sigma, tol, mass
            )
            if candidate is not None:
                pairs = candidate
                break
            est_factor *= 0.1

        if beta < _BREAKDOWN_TOL:
            restarts += 1
            g = state.basis.T @ (B @ state.basis)
            drift = max(drift, float(np.abs(g - np.eye(state.j)).max()))
            v = fresh_vector(state)
            if v is None:
                exhausted = True
                break
            betas.append(0.0)
            state.append(v)
        else:
            betas.append(beta)
            state.append(w / beta)

        if len(alphas) >= max_iter or state.j > n:
            break

    info = {
        "iterations": len(alphas),
        "restarts": restarts,
        "orthogonality_drift": drift,
        "cg": cg_stats,
        "subspace": state.j,
    }

    if pairs is None:
        # iteration cap or exhausted B-range: salvage what has converged
        theta, s_mat = scipy.linalg.eigh_tridiagonal(
            np.asarray(alphas), np.asarray(betas[: len(alphas) - 1])
        )
        cutoff = _INFINITE_THETA_RTOL * max(np.abs(theta).max(), 1e-300)
        finite = np.flatnonzero(np.abs(theta) > cutoff)
        finite = finite[np.argsort(-theta[finite])]
        take = finite[: min(nev, len(finite))]
        pairs = _extract_pairs(
            A, B, op, state.q[:, : len(alphas)], s_mat, theta, take, sigma, tol,
            mass, best_effort=True,
        )
        converged = [p for p in pairs if p.converged]
        if exhausted and len(converged) == len(pairs):
            pairs = converged  # pencil has fewer finite modes than requested
        else:
            raise NotConvergedError(
                f"{len(converged)} of {nev} pairs converged within "
                f"{len(alphas)} iterations",
                pairs=pairs,
            )

    g = state.basis.T @ (B @ state.basis)
    info["orthogonality_drift"] = max(drift, float(np.abs(g - np.eye(state.j)).max()))
    pairs.sort(key=lambda p: p.eigenvalue)
    if return_info:
        return pairs, info
    return pairs


def _extract_pairs(A, B, op, basis, s_mat, theta, take, sigma, tol, mass,
                   best_effort=False):
    """Form, purify and residual-check Ritz pairs; None if any fails."""
    pairs = []
    for r in take:
        lam = sigma + 1.0 / theta[r]
        y = basis @ s_mat[: basis.shape[1], r]
        res = _pencil_residual(A, B, lam, y)
        # one application of the shift-inverted operator suppresses
        # components in the nullspace of B
        y_pure = op(y)
        nrm = np.linalg.norm(y_pure)
        if nrm > 0.0:
            res_pure = _pencil_residual(A, B, lam, y_pure)
            if res_pure <= res:
                y, res = y_pure, res_pure
        if res > tol and not best_effort:
            return None
        norm_mat = B if mass is None else mass
        scale = float(np.sqrt(max(y @ (norm_mat @ y), 0.0)))
        if scale <= 0.0:
            scale = float(np.linalg.norm(y))
        y = y / scale
        pairs.append(
            EigenPair(
                eigenvalue=float(lam),
                vector=y,
                algebraic_residual=res,
                functional_residual=res,
                converged=res <= tol,
            )
        )
    return pairs


def _pencil_residual(A, B, lam, y):
    r = (A @ y) - lam * (B @ y)
    return float(np.linalg.norm(r) / np.linalg.norm(y))
