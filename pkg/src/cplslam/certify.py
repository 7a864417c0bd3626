"""Rounding, translation recovery and optimality certificates.

For a point ``Y`` (n x r, unit rows) the certificate matrix is
``S = M - Lambda`` with ``Lambda = Re ddiag(M Y Y^H)``.  ``S Y = 0`` with
``S`` positive semidefinite certifies that ``Y Y^H`` solves the semidefinite
relaxation, and for any ``Y``

    F(Y) + n * min(lambda_min(S), 0)

is a lower bound on the optimal value of the relaxation, hence on the MLE.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import manifold as mf
from .graph import mle_objective
from .matrices import FactorizationError, ReducedQuadraticForm
from .se2 import PlanarPose, UnitComplex

log = logging.getLogger(__name__)

CERTIFIED = "certified"
SADDLE = "saddle"
UNCERTIFIED = "uncertified"
EXHAUSTED = "exhausted"


class RoundingError(ArithmeticError):
    pass


@dataclass(frozen=True)
class CertifyConfig:
    eig_rel_tol: float = 1e-8  # lambda_min >= -eig_rel_tol * sigma
    residual_rel_tol: float = 1e-8  # ||S Y|| <= residual_rel_tol * scale
    dense_max_n: int = 300
    lanczos_tol: float = 1e-7
    lanczos_maxiter_factor: int = 10
    refine: bool = True


@dataclass
class Certificate:
    lambda_min: float
    eigvec: np.ndarray
    first_order_residual: float
    sdp_lower_bound: float
    rounded_objective: float
    relative_suboptimality: float
    status: str
    eig_tol: float = 0.0
    residual_tol: float = 0.0
    sigma: float = 0.0
    near_zero_eigs: int | None = None
    method: str = ""
    diagnostics: list[str] = field(default_factory=list)

    @property
    def certified(self) -> bool:
        return self.status == CERTIFIED

    def as_dict(self) -> dict:
        return {
            "lambda_min": self.lambda_min,
            "first_order_residual": self.first_order_residual,
            "sdp_lower_bound": self.sdp_lower_bound,
            "rounded_objective": self.rounded_objective,
            "relative_suboptimality": self.relative_suboptimality,
            "status": self.status,
            "eig_tol": self.eig_tol,
            "residual_tol": self.residual_tol,
            "near_zero_eigs": self.near_zero_eigs,
            "method": self.method,
            "diagnostics": list(self.diagnostics),
        }


@dataclass
class Solution:
    poses: list[PlanarPose]
    landmarks: np.ndarray
    objective: float
    certificate: Certificate
    rotations: np.ndarray
    translations: np.ndarray

    def xytheta(self) -> np.ndarray:
        return np.column_stack([self.translations.real, self.translations.imag, np.angle(self.rotations)])


# rounding and recovery ----------------------------------------------------


def round_solution(Y: np.ndarray, perturb_zeros: bool = False, rng: np.random.Generator | None = None) -> np.ndarray:
    """Normalized leading left singular vector of ``Y``, phase-fixed so entry 0 is real positive."""
    Y = mf._as2d(Y)
    if not np.any(Y):
        raise RoundingError("cannot round a zero matrix")
    U, s, _ = np.linalg.svd(Y, full_matrices=False)
    u = U[:, 0]
    mag = np.abs(u)
    zero = mag <= np.finfo(float).tiny
    if np.any(zero):
        if not perturb_zeros:
            raise RoundingError(f"leading singular vector has {int(zero.sum())} zero entries")
        rng = rng or np.random.default_rng(0)
        eps = np.finfo(float).eps * max(mag.max(), 1.0)
        u = u.copy()
        u[zero] = eps * np.exp(2j * np.pi * rng.random(int(zero.sum())))
        mag = np.abs(u)
    z = u / mag
    return z * np.conj(z[0])


# keep the algorithmic name available
round = round_solution  # noqa: A001


def recover_translations(form: ReducedQuadraticForm, z: np.ndarray):
    """Optimal landmarks and translations for fixed rotations, first pose at the origin."""
    z = np.asarray(z, dtype=complex).ravel()
    beta = form.recover(z)
    nl = form.graph.n_l
    beta = beta - beta[nl]
    return beta[:nl], beta[nl:]


# minimum eigenpair ----------------------------------------------------------


def _multipliers(form, Y):
    Y = mf._as2d(Y)
    MY = form.apply(Y)
    return MY, mf.row_dots(MY, Y)


def _sigma_bound(form: ReducedQuadraticForm, lam: np.ndarray) -> float:
    """Upper bound on the spectral radius of ``S``: Gershgorin bound of ``M`` plus ``max|lambda|``."""
    return form.scale + float(np.max(np.abs(lam))) if len(lam) else form.scale


def _dense_min_eig(form, lam, zero_tol):
    S = form.dense() - np.diag(lam)
    S = 0.5 * (S + S.conj().T)
    w, V = np.linalg.eigh(S)
    return float(w[0]), V[:, 0], int(np.sum(w <= zero_tol))


def _shift_invert_solver(form: ReducedQuadraticForm, lam: np.ndarray, shift: float):
    """Solve ``(S - shift I) x = b`` through the sparse full-problem matrix."""
    g = form.graph
    full = form.full
    off = g.n_l + g.n
    dim = full.gamma.shape[0]
    d = np.zeros(dim)
    d[off:] = lam + shift
    K = (full.gamma - sp.diags(d)).tocsc()
    keep = np.ones(dim, dtype=bool)
    keep[g.n_l] = False  # translational gauge
    idx = np.flatnonzero(keep)
    lu = spla.splu(K[idx][:, idx])
    rot = slice(off - 1, dim - 1)

    def solve(b):
        b = np.asarray(b, dtype=complex).ravel()
        rhs = np.zeros(len(idx), dtype=complex)
        rhs[rot] = b
        return lu.solve(rhs)[rot]

    return solve


def _iterative_min_eig(form, lam, sigma, cfg: CertifyConfig, diags: list[str]):
    n = form.n

    def s_mv(x):
        x = np.asarray(x, dtype=complex).ravel()
        return form.apply(x) - lam * x

    shifted = spla.LinearOperator((n, n), matvec=lambda x: sigma * np.ravel(x) - s_mv(x), dtype=complex)
    v0 = np.ones(n, dtype=complex)
    w, V = spla.eigsh(shifted, k=1, which="LA", tol=cfg.lanczos_tol, maxiter=cfg.lanczos_maxiter_factor * n, v0=v0)
    lam_min = sigma - float(w[0])
    vec = V[:, 0]
    method = "lanczos"
    if cfg.refine:
        margin = max(1e-6 * sigma, 10 * cfg.lanczos_tol * sigma)
        try:
            solve = _shift_invert_solver(form, lam, lam_min - margin)
            S_op = spla.LinearOperator((n, n), matvec=s_mv, dtype=complex)
            OPinv = spla.LinearOperator((n, n), matvec=solve, dtype=complex)
            w2, V2 = spla.eigsh(S_op, k=1, sigma=lam_min - margin, OPinv=OPinv, which="LM", v0=vec, tol=1e-12, maxiter=1000)
            lam_min, vec = float(w2[0]), V2[:, 0]
            method = "lanczos+shift_invert"
        except (RuntimeError, spla.ArpackError, FactorizationError) as exc:
            diags.append(f"shift-invert refinement failed: {exc}")
    return lam_min, vec, method


def min_eigenpair(form: ReducedQuadraticForm, Y: np.ndarray, cfg: CertifyConfig = CertifyConfig()):
    """``(lambda_min, eigvec, sigma, near_zero_count, method, diagnostics)`` of ``S(Y)``."""
    _, lam = _multipliers(form, Y)
    sigma = _sigma_bound(form, lam)
    diags: list[str] = []
    if form.n <= cfg.dense_max_n:
        lmin, v, nz = _dense_min_eig(form, lam, cfg.eig_rel_tol * sigma)
        return lmin, v, sigma, nz, "dense", diags
    try:
        lmin, v, method = _iterative_min_eig(form, lam, sigma, cfg, diags)
    except spla.ArpackNoConvergence as exc:
        diags.append(f"eigensolver did not converge: {exc}")
        return math.nan, np.zeros(form.n, complex), sigma, None, "lanczos", diags
    return lmin, v, sigma, None, method, diags


def build_certificate(form: ReducedQuadraticForm, Y: np.ndarray, cfg: CertifyConfig = CertifyConfig()) -> Certificate:
    """Certificate for a rank-one ``z`` or a relaxed point ``Y``."""
    Y = mf._as2d(Y)
    n = form.n
    MY, lam = _multipliers(form, Y)
    residual = mf.norm(MY - lam[:, None] * Y)
    F = form.objective(Y)
    lmin, v, sigma, nz, method, diags = min_eigenpair(form, Y, cfg)

    eig_tol = cfg.eig_rel_tol * sigma
    res_tol = cfg.residual_rel_tol * form.scale
    if math.isnan(lmin):
        lb = -math.inf
        status = UNCERTIFIED
    else:
        lb = F + n * min(lmin, 0.0)
        if lmin < -eig_tol:
            status = SADDLE if residual <= res_tol else UNCERTIFIED
        else:
            status = CERTIFIED if residual <= res_tol else UNCERTIFIED
    if status != CERTIFIED and residual > res_tol:
        diags.append(f"first-order residual {residual:.3e} exceeds {res_tol:.3e}")
    eps = np.finfo(float).eps
    if math.isfinite(lb):
        gap = F - lb
        rel = gap / max(abs(lb), eps)
        rel = 0.0 if rel < 0 else rel
    else:
        rel = math.inf
    return Certificate(
        lambda_min=lmin,
        eigvec=v,
        first_order_residual=residual,
        sdp_lower_bound=lb,
        rounded_objective=F,
        relative_suboptimality=rel,
        status=status,
        eig_tol=eig_tol,
        residual_tol=res_tol,
        sigma=sigma,
        near_zero_eigs=nz,
        method=method,
        diagnostics=diags,
    )


def assemble_solution(
    form: ReducedQuadraticForm,
    Y: np.ndarray,
    *,
    certify: bool = True,
    cfg: CertifyConfig = CertifyConfig(),
    perturb_zeros: bool = False,
    relaxed: Certificate | None = None,
) -> Solution:
    """Round ``Y``, recover translations and landmarks, and certify the estimate.

    ``relaxed`` is the certificate of ``Y`` itself; its lower bound is used
    when it is tighter than the one obtained at the rounded estimate.
    """
    z = round_solution(Y, perturb_zeros=perturb_zeros)
    s, t = recover_translations(form, z)
    g = form.graph
    objective = mle_objective(g, z, t, s)
    if certify:
        cert = build_certificate(form, z, cfg)
        if relaxed is not None and relaxed.sdp_lower_bound > cert.sdp_lower_bound:
            lb = relaxed.sdp_lower_bound
            gap = cert.rounded_objective - lb
            cert.sdp_lower_bound = lb
            cert.relative_suboptimality = max(gap, 0.0) / max(abs(lb), np.finfo(float).eps)
            cert.diagnostics.append("lower bound taken from the relaxed solution")
    else:
        F = form.objective(z)
        cert = Certificate(math.nan, np.zeros(g.n, complex), math.nan, math.nan, F, math.nan, UNCERTIFIED, method="skipped")
    poses = [PlanarPose(ti, UnitComplex.from_complex(zi)) for ti, zi in zip(t, z)]
    return Solution(poses, s, objective, cert, z, t)
