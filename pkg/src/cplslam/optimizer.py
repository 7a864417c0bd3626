"""Riemannian trust-region minimization of ``F(Y) = tr(M Y Y^H)`` on OB(r, n).

The inner solver is Steihaug-Toint truncated CG, optionally preconditioned
with a sparse solve against the full-problem matrix ``Gamma`` (rotation block
of its inverse), which approximates the inverse of ``M``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import manifold as mf
from .matrices import AnchoredSolver, FactorizationError, ReducedQuadraticForm

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrustRegionConfig:
    grad_norm_tol: float = 1e-6  # relative to the gradient norm at the start
    rel_func_tol: float = 1e-10
    max_outer_iters: int = 500
    initial_radius: float = 1.0
    max_radius: float = 1e4
    tcg_kappa: float = 0.1
    tcg_theta: float = 0.5
    max_inner_iters: int = 500
    accept_rho: float = 0.1
    # absolute clamps on the effective gradient tolerance; None disables
    grad_norm_floor: float | None = None
    grad_norm_cap: float | None = None

    def __post_init__(self):
        if not 0 < self.accept_rho < 0.25:
            raise ValueError("accept_rho must lie in (0, 0.25)")
        if not 0 < self.tcg_kappa < 1:
            raise ValueError("tcg_kappa must lie in (0, 1)")
        if not 0 < self.tcg_theta <= 1:
            raise ValueError("tcg_theta must lie in (0, 1]")
        if self.initial_radius <= 0 or self.max_radius < self.initial_radius:
            raise ValueError("need 0 < initial_radius <= max_radius")

    def effective_grad_tol(self, grad0_norm: float) -> float:
        tol = self.grad_norm_tol * grad0_norm
        if self.grad_norm_floor is not None:
            tol = max(tol, self.grad_norm_floor)
        if self.grad_norm_cap is not None:
            tol = min(tol, self.grad_norm_cap)
        return tol


class Preconditioner:
    """Sparse factorization of ``Gamma`` with the first pose pinned.

    ``precondition(b)`` solves ``Gamma [a'; a] = [0; b]`` and returns ``a``.
    With ``tikhonov`` set, ``Gamma + tikhonov * scale * I`` is factored
    instead of pinning.
    """

    def __init__(self, form: ReducedQuadraticForm, tikhonov: float | None = None):
        g = form.graph
        self.n = g.n
        self.n_l = g.n_l
        gamma = form.full.gamma
        dim = gamma.shape[0]
        self.rot_offset = g.n_l + g.n
        if tikhonov is None:
            pinned = (g.n_l, self.rot_offset)
        else:
            gamma = gamma + tikhonov * max(form.scale, 1.0) * sp.identity(dim, format="csr")
            pinned = ()
        try:
            self.gamma_factor = AnchoredSolver(gamma, pinned=pinned)
        except FactorizationError as exc:
            raise FactorizationError(f"preconditioner factorization failed: {exc}") from exc

    def __call__(self, B: np.ndarray) -> np.ndarray:
        return precondition(self, B)


def precondition(p: Preconditioner, B: np.ndarray) -> np.ndarray:
    B = np.asarray(B, dtype=complex)
    if B.shape[0] != p.n:
        raise ValueError(f"expected {p.n} rows, got {B.shape[0]}")
    vec = B.ndim == 1
    B2 = B.reshape(p.n, -1)
    rhs = np.zeros((p.gamma_factor.dim, B2.shape[1]), dtype=complex)
    rhs[p.rot_offset:] = B2
    a = p.gamma_factor.solve(rhs)[p.rot_offset:]
    return a[:, 0] if vec else a


@dataclass
class TCGResult:
    eta: np.ndarray
    Heta: np.ndarray
    inner_iters: int
    stop_reason: str
    model_decrease: float
    limited_by_radius: bool
    eta_norms: list = field(default_factory=list)  # preconditioned norms of the iterates
    model_values: list = field(default_factory=list)


def tcg_solve(form, Y, grad, radius, p=None, cfg: TrustRegionConfig = TrustRegionConfig(), MY=None) -> TCGResult:
    """Steihaug-Toint truncated CG on the trust-region subproblem at ``Y``.

    The trust region is measured in the preconditioner norm.  Stop reasons:
    ``negative_curvature``, ``boundary``, ``residual_tolerance``,
    ``model_increased`` and ``max_inner_iters``.
    """
    Y = mf._as2d(Y)
    grad = mf._as2d(grad)
    if MY is None:
        MY = form.apply(Y)
    hess = lambda U: mf.riemannian_hessian_vec(form, Y, U, MY)  # noqa: E731
    if p is None:
        prec = lambda R: R  # noqa: E731
    else:
        prec = lambda R: mf.project_tangent(Y, precondition(p, R))  # noqa: E731

    eta = np.zeros_like(grad)
    Heta = np.zeros_like(grad)
    r = grad.copy()
    r0 = mf.norm(r)
    if r0 == 0.0:
        return TCGResult(eta, Heta, 0, "residual_tolerance", 0.0, False, [0.0], [0.0])

    z = prec(r)
    z_r = mf.inner(z, r)
    if not z_r > 0:
        # preconditioner blind to this residual; fall back to steepest descent
        prec = lambda R: R  # noqa: E731
        z = r.copy()
        z_r = mf.inner(z, r)
    d_Pd = z_r
    delta = -z
    e_Pd = 0.0
    e_Pe = 0.0
    model = 0.0
    eta_norms = [0.0]
    models = [0.0]
    reason = "max_inner_iters"
    limited = False
    stop_tol = r0 * min(r0**cfg.tcg_theta, cfg.tcg_kappa)

    j = 0
    while j < cfg.max_inner_iters:
        j += 1
        Hdelta = hess(delta)
        d_Hd = mf.inner(delta, Hdelta)
        alpha = z_r / d_Hd if d_Hd != 0 else math.inf
        e_Pe_new = e_Pe + 2.0 * alpha * e_Pd + alpha**2 * d_Pd
        if d_Hd <= 0 or e_Pe_new >= radius**2:
            tau = (-e_Pd + math.sqrt(max(e_Pd**2 + d_Pd * (radius**2 - e_Pe), 0.0))) / d_Pd
            eta = eta + tau * delta
            Heta = Heta + tau * Hdelta
            model = mf.inner(grad, eta) + 0.5 * mf.inner(eta, Heta)
            eta_norms.append(radius)
            models.append(model)
            reason = "negative_curvature" if d_Hd <= 0 else "boundary"
            limited = True
            break

        new_eta = eta + alpha * delta
        new_Heta = Heta + alpha * Hdelta
        new_model = mf.inner(grad, new_eta) + 0.5 * mf.inner(new_eta, new_Heta)
        if new_model >= model:
            reason = "model_increased"
            break
        eta, Heta, model, e_Pe = new_eta, new_Heta, new_model, e_Pe_new
        eta_norms.append(math.sqrt(e_Pe))
        models.append(model)

        r = r + alpha * Hdelta
        r = mf.project_tangent(Y, r)
        if mf.norm(r) <= stop_tol:
            reason = "residual_tolerance"
            break
        z = prec(r)
        z_r_old = z_r
        z_r = mf.inner(z, r)
        if not z_r > 0:
            reason = "residual_tolerance"
            break
        beta = z_r / z_r_old
        delta = -z + beta * delta
        e_Pd = beta * (e_Pd + alpha * d_Pd)
        d_Pd = z_r + beta**2 * d_Pd

    return TCGResult(eta, Heta, j, reason, -model, limited, eta_norms, models)


@dataclass
class IterationRecord:
    k: int
    objective: float
    grad_norm: float
    radius: float
    rho: float
    accepted: bool
    inner_iters: int
    tcg_stop: str


@dataclass
class RTRResult:
    Y: np.ndarray
    objective: float
    grad_norm: float
    converged: bool
    stop_reason: str
    iterations: int
    grad_tol: float
    trace: list[IterationRecord] = field(default_factory=list)

    @property
    def total_inner_iters(self) -> int:
        return sum(rec.inner_iters for rec in self.trace)


def rtr_minimize(form, Y0, p: Preconditioner | None = None, cfg: TrustRegionConfig = TrustRegionConfig()) -> RTRResult:
    """Minimize ``F`` from ``Y0`` with a Riemannian trust-region method."""
    Y = mf.normalize_rows(Y0)
    F = form.objective(Y)
    MY, grad = mf.egrad_and_grad(form, Y)
    gnorm = mf.norm(grad)
    tol = cfg.effective_grad_tol(gnorm)
    radius = cfg.initial_radius
    trace: list[IterationRecord] = []
    reason = "max_outer_iters"
    eps = np.finfo(float).eps

    k = 0
    small_steps = 0
    while True:
        if gnorm <= tol:
            reason = "grad_norm"
            break
        if k >= cfg.max_outer_iters:
            break
        k += 1
        res = tcg_solve(form, Y, grad, radius, p, cfg, MY)
        try:
            Y_new = mf.retract(Y, res.eta)
            F_new = form.objective(Y_new)
        except mf.RetractionError:
            Y_new, F_new = None, math.inf

        rho_reg = max(1.0, abs(F)) * eps * 1e3
        num = F - F_new + rho_reg
        den = res.model_decrease + rho_reg
        model_decreased = den >= 0
        rho = num / den if den != 0 else -math.inf
        if not math.isfinite(rho) or rho < 0.25 or not model_decreased:
            radius /= 4.0
        elif rho > 0.75 and res.limited_by_radius:
            radius = min(2.0 * radius, cfg.max_radius)

        accepted = bool(model_decreased and rho > cfg.accept_rho and F_new <= F)
        if not accepted and rho >= 0.25:
            radius /= 4.0
        trace.append(IterationRecord(k, F_new if accepted else F, gnorm, radius, rho, accepted, res.inner_iters, res.stop_reason))
        if accepted:
            decrease = F - F_new
            Y, F = Y_new, F_new
            MY, grad = mf.egrad_and_grad(form, Y)
            gnorm = mf.norm(grad)
            trace[-1].grad_norm = gnorm
            # two consecutive negligible decreases: one can be a short step
            small_steps = small_steps + 1 if decrease <= cfg.rel_func_tol * max(abs(F), eps) else 0
            if gnorm > tol and small_steps >= 2:
                reason = "rel_func_tol"
                break
        elif res.model_decrease <= rho_reg:
            # predicted progress is below the resolution of F
            reason = "function_precision"
            break
        elif radius < 1e-15 * max(1.0, cfg.initial_radius):
            reason = "radius_collapse"
            break

    if gnorm <= tol:
        reason = "grad_norm"
    return RTRResult(Y, F, gnorm, gnorm <= tol, reason, k, tol, trace)
