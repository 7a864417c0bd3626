"""Data matrices of the complex quadratic program.

Variable ordering follows ``xi = [s; t; z]`` (landmarks, translations,
rotations) and the edge ordering puts pose-landmark edges before pose-pose
edges.  The rotation-only cost matrix

    M = L(G^z) + T^H Omega^(1/2) Pi Omega^(1/2) T

is never formed; :meth:`ReducedQuadraticForm.apply` evaluates it with one
sparse solve against the anchored weighted Laplacian ``A Omega A^T``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .graph import MeasurementGraph

DENSE_ORACLE_MAX_VERTICES = 2000


class FactorizationError(RuntimeError):
    pass


def _coo(rows, cols, vals, shape, dtype=complex) -> sp.csr_matrix:
    return sp.coo_matrix(
        (np.asarray(vals, dtype=dtype), (np.asarray(rows), np.asarray(cols))), shape=shape
    ).tocsr()


def _check_indices(g: MeasurementGraph):
    P, L = g.pose_arrays, g.landmark_arrays
    for name, arr, hi in (("pose", P["i"], g.n), ("pose", P["j"], g.n), ("pose", L["i"], g.n), ("landmark", L["j"], g.n_l)):
        if len(arr) and (arr.min() < 0 or arr.max() >= hi):
            raise IndexError(f"{name} index out of range in edge list")


@dataclass(frozen=True)
class FullProblem:
    """The Hermitian matrix ``Gamma`` of the full problem and its named blocks."""

    gamma: sp.csr_matrix
    Sigma_s: sp.csr_matrix
    U: sp.csr_matrix
    N: sp.csr_matrix
    L_t: sp.csr_matrix
    Sigma_t: sp.csr_matrix
    E: sp.csr_matrix
    L_z: sp.csr_matrix
    Sigma_z: sp.csr_matrix

    @property
    def Lambda(self) -> sp.csr_matrix:
        """Translational/landmark block ``[[Sigma_s, U], [U^H, L_t + Sigma_t]]``."""
        return sp.bmat([[self.Sigma_s, self.U], [self.U.conj().T, self.L_t + self.Sigma_t]]).tocsr()

    @property
    def Theta(self) -> sp.csr_matrix:
        return sp.vstack([self.N, self.E]).tocsr()


def build_full(g: MeasurementGraph) -> FullProblem:
    """Assemble every block of ``Gamma`` edge by edge."""
    _check_indices(g)
    n, nl = g.n, g.n_l
    P, L = g.pose_arrays, g.landmark_arrays
    pi, pj, t, zm, tau, kap = P["i"], P["j"], P["t"], P["z"], P["tau"], P["kappa"]
    li, lj, s, nu = L["i"], L["j"], L["s"], L["nu"]

    Sigma_s = _coo(lj, lj, nu, (nl, nl))
    U = _coo(lj, li, -nu, (nl, n))
    N = _coo(lj, li, -nu * s, (nl, n))
    L_t = _coo(
        np.concatenate([pi, pj, pi, pj]),
        np.concatenate([pi, pj, pj, pi]),
        np.concatenate([tau, tau, -tau, -tau]),
        (n, n),
    )
    Sigma_t = _coo(li, li, nu, (n, n))
    E = _coo(
        np.concatenate([pi, pj, li]),
        np.concatenate([pi, pi, li]),
        np.concatenate([tau * t, -tau * t, nu * s]),
        (n, n),
    )
    L_z = _coo(
        np.concatenate([pi, pj, pj, pi]),
        np.concatenate([pi, pj, pi, pj]),
        np.concatenate([kap, kap, -kap * zm, -kap * np.conj(zm)]),
        (n, n),
    )
    Sigma_z = _coo(
        np.concatenate([pi, li]),
        np.concatenate([pi, li]),
        np.concatenate([tau * np.abs(t) ** 2, nu * np.abs(s) ** 2]),
        (n, n),
    )
    H = lambda X: X.conj().T  # noqa: E731
    gamma = sp.bmat(
        [
            [Sigma_s, U, N],
            [H(U), L_t + Sigma_t, E],
            [H(N), H(E), L_z + Sigma_z],
        ],
        format="csr",
    )
    return FullProblem(gamma, Sigma_s, U, N, L_t, Sigma_t, E, L_z, Sigma_z)


@dataclass(frozen=True)
class Factors:
    """Sparse factors ``B1 = Omega^(1/2) A^T``, ``B2 = Omega^(1/2) T`` and ``B3``."""

    B1: sp.csr_matrix
    B2: sp.csr_matrix
    B3: sp.csr_matrix
    omega: np.ndarray
    T: sp.csr_matrix
    A: sp.csr_matrix


def build_factors(g: MeasurementGraph) -> Factors:
    _check_indices(g)
    n, nl, m, ml = g.n, g.n_l, g.m, g.m_l
    P, L = g.pose_arrays, g.landmark_arrays
    # landmark edges occupy rows 0..ml-1, pose edges ml..ml+m-1;
    # landmarks occupy vertex slots 0..nl-1, poses nl..nl+n-1
    e_l = np.arange(ml)
    e_p = ml + np.arange(m)
    omega = np.concatenate([L["nu"], P["tau"]])
    A = _coo(
        np.concatenate([L["j"], nl + L["i"], nl + P["j"], nl + P["i"]]),
        np.concatenate([e_l, e_l, e_p, e_p]),
        np.concatenate([np.ones(ml), -np.ones(ml), np.ones(m), -np.ones(m)]),
        (nl + n, ml + m),
        dtype=float,
    )
    T = _coo(
        np.concatenate([e_l, e_p]),
        np.concatenate([L["i"], P["i"]]),
        np.concatenate([-L["s"], -P["t"]]),
        (ml + m, n),
    )
    W = sp.diags(np.sqrt(omega))
    B1 = (W @ A.T).tocsr()
    B2 = (W @ T).tocsr()
    sk = np.sqrt(P["kappa"])
    B3 = _coo(
        np.concatenate([np.arange(m), np.arange(m)]),
        np.concatenate([P["i"], P["j"]]),
        np.concatenate([-sk * P["z"], sk.astype(complex)]),
        (m, n),
    )
    return Factors(B1, B2, B3, omega, T, A)


def _splu(K: sp.spmatrix, symmetric: bool = True):
    K = sp.csc_matrix(K)
    opts = dict(permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0, options={"SymmetricMode": True}) if symmetric else {}
    try:
        lu = spla.splu(K, **opts)
    except RuntimeError as exc:
        raise FactorizationError(str(exc)) from exc
    return lu


class AnchoredSolver:
    """Solves ``K x = b`` for a singular Hermitian ``K`` by deleting ``pinned`` rows/columns.

    The pinned coordinates of the returned solution are zero.  When ``b`` is in
    the range of ``K`` and the deletion leaves a nonsingular matrix, the result
    is an exact solution.
    """

    def __init__(self, K: sp.spmatrix, pinned=(0,)):
        K = sp.csr_matrix(K)
        self.dim = K.shape[0]
        keep = np.ones(self.dim, dtype=bool)
        keep[list(pinned)] = False
        self.keep = np.flatnonzero(keep)
        self.pinned = tuple(pinned)
        self.real = not np.iscomplexobj(K.data)
        self._lu = _splu(K[self.keep][:, self.keep]) if len(self.keep) else None

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b)
        vec = b.ndim == 1
        B = b.reshape(self.dim, -1)
        out = np.zeros(B.shape, dtype=np.result_type(B.dtype, complex if not self.real else float))
        if self._lu is not None:
            rhs = B[self.keep]
            if self.real and np.iscomplexobj(rhs):
                k = rhs.shape[1]
                sol = self._lu.solve(np.ascontiguousarray(np.hstack([rhs.real, rhs.imag])))
                out[self.keep] = sol[:, :k] + 1j * sol[:, k:]
            else:
                out[self.keep] = self._lu.solve(np.ascontiguousarray(rhs, dtype=out.dtype))
        return out[:, 0] if vec else out


class ReducedQuadraticForm:
    """Matrix-free rotation-only cost operator ``M``.

    ``apply`` and ``objective`` are pure; the factorizations are computed on
    construction and only read afterwards.
    """

    def __init__(self, g: MeasurementGraph):
        self.graph = g
        self.n = g.n
        f = build_factors(g)
        self.factors = f
        self.B1, self.B2, self.B3 = f.B1, f.B2, f.B3
        self.omega = f.omega
        self.T = f.T
        self.incidence = f.A
        self.rot_laplacian = (f.B3.conj().T @ f.B3).tocsr()
        lap = (f.A @ sp.diags(f.omega) @ f.A.T).tocsr()
        self.weighted_laplacian = lap
        try:
            self.anchored_laplacian_factor = AnchoredSolver(lap, pinned=(0,))
        except FactorizationError as exc:
            raise FactorizationError(f"anchored Laplacian factorization failed: {exc}") from exc
        self.B1H = f.B1.T.tocsr()
        self.B2H = f.B2.conj().T.tocsr()

    # Pi u = u - B1 (B1^H B1)^+ B1^H u
    def project(self, u: np.ndarray) -> np.ndarray:
        y = self.anchored_laplacian_factor.solve(self.B1H @ u)
        return u - self.B1 @ y

    def _check(self, X):
        X = np.asarray(X)
        if X.shape[0] != self.n:
            raise ValueError(f"expected {self.n} rows, got {X.shape[0]}")
        return X

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = self._check(X)
        return self.rot_laplacian @ X + self.B2H @ self.project(self.B2 @ X)

    def objective(self, Y: np.ndarray) -> float:
        """``trace(M Y Y^H)`` evaluated as a sum of squared residual norms."""
        Y = self._check(Y)
        r3 = self.B3 @ Y
        r2 = self.project(self.B2 @ Y)
        return float(np.vdot(r3, r3).real + np.vdot(r2, r2).real)

    def recover(self, Z: np.ndarray) -> np.ndarray:
        """Minimizer ``beta = -Lambda^+ Theta Z`` with combined vertex 0 anchored at the origin."""
        Z = self._check(Z)
        return -self.anchored_laplacian_factor.solve(self.B1H @ (self.B2 @ Z))

    @cached_property
    def full(self) -> FullProblem:
        return build_full(self.graph)

    @cached_property
    def scale(self) -> float:
        """Gershgorin bound on the spectrum of ``M`` (it is dominated by ``L_z + Sigma_z``)."""
        blk = self.full.L_z + self.full.Sigma_z
        return float(np.max(np.asarray(abs(blk).sum(axis=1)).ravel())) if self.n else 0.0

    def dense(self) -> np.ndarray:
        return self.apply(np.eye(self.n, dtype=complex))


def build_reduced(g: MeasurementGraph) -> ReducedQuadraticForm:
    return ReducedQuadraticForm(g)


def apply(form: ReducedQuadraticForm, X: np.ndarray) -> np.ndarray:
    return form.apply(X)


# dense oracle -------------------------------------------------------------


def dense_factors(g: MeasurementGraph):
    """Dense ``B1``, ``B2``, ``B3`` built entry by entry from the edge lists."""
    n, nl = g.n, g.n_l
    rows = g.m_l + g.m
    B1 = np.zeros((rows, nl + n))
    B2 = np.zeros((rows, n), dtype=complex)
    B3 = np.zeros((g.m, n), dtype=complex)
    e = 0
    for edge in g.landmark_edges:
        w = np.sqrt(edge.nu)
        B1[e, edge.j] += w
        B1[e, nl + edge.i] -= w
        B2[e, edge.i] -= w * edge.s_meas
        e += 1
    for k, edge in enumerate(g.pose_edges):
        w = np.sqrt(edge.tau)
        B1[e, nl + edge.j] += w
        B1[e, nl + edge.i] -= w
        B2[e, edge.i] -= w * edge.t_meas
        c = np.sqrt(edge.kappa)
        B3[k, edge.i] -= c * edge.z_meas
        B3[k, edge.j] += c
        e += 1
    return B1, B2, B3


def pinv_hermitian(K: np.ndarray, rcond: float = 1e-10) -> np.ndarray:
    w, V = np.linalg.eigh(K)
    cutoff = rcond * max(np.max(np.abs(w)), np.finfo(float).tiny)
    inv = np.where(np.abs(w) > cutoff, 1.0 / np.where(w == 0, 1, w), 0.0)
    return (V * inv) @ V.conj().T


def build_dense_oracle(g: MeasurementGraph) -> np.ndarray:
    """Dense ``B3^H B3 + B2^H (I - B1 (B1^H B1)^+ B1^H) B2`` for small graphs."""
    if g.n + g.n_l > DENSE_ORACLE_MAX_VERTICES:
        raise ValueError(f"dense oracle limited to {DENSE_ORACLE_MAX_VERTICES} vertices")
    B1, B2, B3 = dense_factors(g)
    proj = np.eye(B1.shape[0]) - B1 @ pinv_hermitian(B1.T @ B1) @ B1.T
    M = B3.conj().T @ B3 + B2.conj().T @ proj @ B2
    return 0.5 * (M + M.conj().T)
