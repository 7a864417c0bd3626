"""Complex oblique manifold OB(r, n): n x r complex matrices with unit-norm rows.

The metric is ``<U, V> = Re tr(U^H V)``.  Functions take plain arrays; the
point ``Y`` is always passed alongside tangent vectors.
"""

from __future__ import annotations

import numpy as np

ROW_NORM_TOL = 1e-12


class RetractionError(ArithmeticError):
    pass


def inner(U: np.ndarray, V: np.ndarray) -> float:
    return float(np.vdot(U, V).real)


def norm(U: np.ndarray) -> float:
    return float(np.linalg.norm(U))


def _as2d(A) -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    return A[:, None] if A.ndim == 1 else A


def row_dots(U: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """``Re ddiag(U Y^H)`` as a length-n vector."""
    return np.einsum("ij,ij->i", U, Y.conj()).real


def project_tangent(Y: np.ndarray, U: np.ndarray) -> np.ndarray:
    Y, U = _as2d(Y), _as2d(U)
    if Y.shape != U.shape:
        raise ValueError(f"shape mismatch: {Y.shape} vs {U.shape}")
    return U - row_dots(U, Y)[:, None] * Y


def normalize_rows(X: np.ndarray) -> np.ndarray:
    X = _as2d(X)
    nrm = np.linalg.norm(X, axis=1)
    if np.any(nrm == 0) or not np.all(np.isfinite(nrm)):
        raise RetractionError("retraction produced a zero or non-finite row")
    return X / nrm[:, None]


def retract(Y: np.ndarray, U: np.ndarray) -> np.ndarray:
    return normalize_rows(_as2d(Y) + _as2d(U))


def is_on_manifold(Y: np.ndarray, tol: float = ROW_NORM_TOL) -> bool:
    return bool(np.all(np.abs(np.linalg.norm(_as2d(Y), axis=1) - 1.0) <= tol))


def random_point(n: int, r: int, rng: np.random.Generator) -> np.ndarray:
    return normalize_rows(rng.standard_normal((n, r)) + 1j * rng.standard_normal((n, r)))


def random_tangent(Y: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    Y = _as2d(Y)
    U = rng.standard_normal(Y.shape) + 1j * rng.standard_normal(Y.shape)
    return project_tangent(Y, U)


def cost(form, Y: np.ndarray) -> float:
    """``F(Y) = tr(M Y Y^H)``."""
    return form.objective(_as2d(Y))


def egrad_and_grad(form, Y: np.ndarray):
    """Return ``(M Y, grad F(Y))``; the first is reused by the Hessian."""
    Y = _as2d(Y)
    MY = form.apply(Y)
    return MY, project_tangent(Y, 2.0 * MY)


def riemannian_gradient(form, Y: np.ndarray) -> np.ndarray:
    return egrad_and_grad(form, Y)[1]


def riemannian_hessian_vec(form, Y: np.ndarray, U: np.ndarray, MY: np.ndarray | None = None) -> np.ndarray:
    """``proj_Y(2 M U - 2 Re ddiag(M Y Y^H) U)``.

    ``MY`` may be supplied to skip one operator application.
    """
    Y, U = _as2d(Y), _as2d(U)
    if MY is None:
        MY = form.apply(Y)
    lam = row_dots(MY, Y)
    return project_tangent(Y, 2.0 * form.apply(U) - 2.0 * lam[:, None] * U)
