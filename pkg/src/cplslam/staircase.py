"""Riemannian staircase: rank-restricted relaxations at increasing rank."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import manifold as mf
from .certify import CERTIFIED, EXHAUSTED, Certificate, CertifyConfig, build_certificate
from .optimizer import Preconditioner, RTRResult, TrustRegionConfig, rtr_minimize


def default_schedule(n: int, r0: int = 2) -> tuple[int, ...]:
    r_max = min(n + 1, math.ceil(math.sqrt(n)) + 2)
    r_max = max(r_max, r0)
    return tuple(range(r0, r_max + 1))


@dataclass(frozen=True)
class StaircaseConfig:
    rank_schedule: tuple[int, ...] | None = None  # None: default_schedule(n)
    rank_deficiency_rel_tol: float = 1e-6
    escape_step: float = 1.0
    escape_shrink: float = 0.5
    escape_max_halvings: int = 25
    trust_region: TrustRegionConfig = TrustRegionConfig()
    certify: CertifyConfig = CertifyConfig()
    # gradient tolerance clamps relative to the operator scale
    grad_cap_rel: float = 1e-9
    grad_floor_rel: float = 1e-14
    use_preconditioner: bool = True

    def schedule_for(self, n: int) -> tuple[int, ...]:
        sched = default_schedule(n) if self.rank_schedule is None else tuple(self.rank_schedule)
        if not sched or sched[0] < 2:
            raise ValueError("rank schedule must start at r0 >= 2")
        if any(b <= a for a, b in zip(sched, sched[1:])):
            raise ValueError("rank schedule must be strictly increasing")
        if sched[-1] > n + 1:
            raise ValueError("ranks above n + 1 are never needed")
        return sched


@dataclass
class LevelRecord:
    rank: int
    rtr: RTRResult
    numerical_rank: int
    certificate: Certificate
    escaped: bool = False
    seconds: float = 0.0


@dataclass
class StaircaseResult:
    Y: np.ndarray
    objective: float
    certificate: Certificate
    levels: list[LevelRecord] = field(default_factory=list)

    @property
    def rank(self) -> int:
        return self.Y.shape[1]


def numerical_rank(Y: np.ndarray, rel_tol: float = 1e-6) -> int:
    s = np.linalg.svd(mf._as2d(Y), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rel_tol * s[0]))


def lift(Y: np.ndarray, r_next: int) -> np.ndarray:
    Y = mf._as2d(Y)
    n, r = Y.shape
    if r_next <= r:
        raise ValueError(f"cannot lift from rank {r} to {r_next}")
    return np.hstack([Y, np.zeros((n, r_next - r), dtype=complex)])


def escape_direction(cert: Certificate, Y_lifted: np.ndarray) -> np.ndarray:
    """Tangent direction at the lifted point with ``v`` in the last column."""
    if not (cert.lambda_min < 0):
        raise ValueError("no escape direction: the certificate has no negative eigenvalue")
    Y = mf._as2d(Y_lifted)
    U = np.zeros_like(Y)
    U[:, -1] = cert.eigvec
    return mf.project_tangent(Y, U)


def escape_saddle(form, Y_lifted: np.ndarray, cert: Certificate, cfg: StaircaseConfig):
    """Backtracking search along the escape direction; returns the new point or ``None``."""
    U = escape_direction(cert, Y_lifted)
    F0 = form.objective(Y_lifted)
    step = cfg.escape_step
    for _ in range(cfg.escape_max_halvings + 1):
        try:
            Y_new = mf.retract(Y_lifted, step * U)
        except mf.RetractionError:
            Y_new = None
        if Y_new is not None and form.objective(Y_new) < F0:
            return Y_new
        step *= cfg.escape_shrink
    return None


def solve_staircase(form, z0: np.ndarray, cfg: StaircaseConfig = StaircaseConfig(), preconditioner=None, clock=None) -> StaircaseResult:
    import time

    clock = clock or time.perf_counter
    n = form.n
    schedule = cfg.schedule_for(n)
    scale = max(form.scale, np.finfo(float).tiny)
    tr_cfg = replace(
        cfg.trust_region,
        grad_norm_cap=cfg.grad_cap_rel * scale,
        grad_norm_floor=cfg.grad_floor_rel * scale * math.sqrt(n),
    )
    if preconditioner is None and cfg.use_preconditioner:
        preconditioner = Preconditioner(form)

    z0 = mf._as2d(z0)
    Y = lift(mf.normalize_rows(z0), schedule[0]) if z0.shape[1] < schedule[0] else mf.normalize_rows(z0)
    levels: list[LevelRecord] = []
    best = None
    for idx, r in enumerate(schedule):
        t0 = clock()
        if Y.shape[1] < r:
            Y = lift(Y, r)
        escaped = False
        res = rtr_minimize(form, Y, preconditioner, tr_cfg)
        Y = res.Y
        rank = numerical_rank(Y, cfg.rank_deficiency_rel_tol)
        cert = build_certificate(form, Y, cfg.certify)
        rec = LevelRecord(r, res, rank, cert, seconds=0.0)
        levels.append(rec)
        if best is None or res.objective <= best[1]:
            best = (Y, res.objective, cert)
        if cert.status == CERTIFIED:
            rec.seconds = clock() - t0
            return StaircaseResult(Y, res.objective, cert, levels)
        if idx == len(schedule) - 1:
            rec.seconds = clock() - t0
            break
        Y = lift(Y, schedule[idx + 1])
        if cert.lambda_min < -cert.eig_tol:
            Y_esc = escape_saddle(form, Y, cert, cfg)
            if Y_esc is not None:
                Y = Y_esc
                escaped = True
        rec.escaped = escaped
        rec.seconds = clock() - t0

    Yb, Fb, cb = best
    cb = replace(cb, status=EXHAUSTED, diagnostics=cb.diagnostics + [f"schedule {schedule} exhausted ({cb.status} at best level)"])
    return StaircaseResult(Yb, Fb, cb, levels)
