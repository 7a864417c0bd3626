"""End-to-end solve: build, initialize, staircase, round, recover, certify."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .certify import Solution, assemble_solution
from .graph import MeasurementGraph
from .initialization import initialize
from .matrices import ReducedQuadraticForm
from .optimizer import Preconditioner
from .staircase import StaircaseConfig, StaircaseResult, solve_staircase

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class SolveConfig:
    init: str = "chordal"
    r0: int = 2
    r_max: int | None = None
    grad_tol: float | None = None  # overrides the relative gradient tolerance
    certify: bool = True
    seed: int = 0  # only used to perturb degenerate roundings
    staircase: StaircaseConfig = StaircaseConfig()

    def staircase_config(self, n: int) -> StaircaseConfig:
        from .staircase import default_schedule

        sched = default_schedule(n, self.r0)
        if self.r_max is not None:
            sched = tuple(range(self.r0, max(self.r_max, self.r0) + 1))
        cfg = replace(self.staircase, rank_schedule=sched)
        if self.grad_tol is not None:
            cfg = replace(cfg, trust_region=replace(cfg.trust_region, grad_norm_tol=self.grad_tol))
        return cfg


@dataclass
class RunReport:
    dataset: str
    n: int
    n_l: int
    m: int
    m_l: int
    objective: float
    certificate: dict
    timings: dict
    final_rank: int
    levels: list
    config: dict
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SolveResult:
    solution: Solution
    staircase: StaircaseResult
    report: RunReport
    extras: dict = field(default_factory=dict)


def _config_echo(cfg: SolveConfig, sc: StaircaseConfig) -> dict:
    tr = sc.trust_region
    return {
        "init": cfg.init,
        "r0": cfg.r0,
        "rank_schedule": list(sc.rank_schedule or ()),
        "certify": cfg.certify,
        "seed": cfg.seed,
        "grad_norm_tol": tr.grad_norm_tol,
        "rel_func_tol": tr.rel_func_tol,
        "max_outer_iters": tr.max_outer_iters,
        "max_inner_iters": tr.max_inner_iters,
        "preconditioner": sc.use_preconditioner,
    }


def solve(g: MeasurementGraph, cfg: SolveConfig = SolveConfig(), dataset: str = "") -> SolveResult:
    clock = time.perf_counter
    timings: dict = {}
    t0 = clock()
    form = ReducedQuadraticForm(g)
    sc = cfg.staircase_config(g.n)
    prec = Preconditioner(form) if sc.use_preconditioner else None
    timings["build"] = clock() - t0

    t0 = clock()
    z0 = initialize(g, cfg.init)
    timings["init"] = clock() - t0

    t0 = clock()
    st = solve_staircase(form, z0, sc, preconditioner=prec, clock=clock)
    timings["staircase"] = clock() - t0
    timings["staircase_per_rank"] = {str(lv.rank): lv.seconds for lv in st.levels}

    t0 = clock()
    sol = assemble_solution(
        form,
        st.Y,
        certify=cfg.certify,
        cfg=sc.certify,
        perturb_zeros=False,
        relaxed=st.certificate if cfg.certify else None,
    )
    timings["round_recover_certify"] = clock() - t0
    timings["total"] = sum(v for k, v in timings.items() if isinstance(v, float))

    levels = [
        {
            "rank": lv.rank,
            "objective": lv.rtr.objective,
            "grad_norm": lv.rtr.grad_norm,
            "iterations": lv.rtr.iterations,
            "inner_iterations": lv.rtr.total_inner_iters,
            "stop_reason": lv.rtr.stop_reason,
            "numerical_rank": lv.numerical_rank,
            "status": lv.certificate.status,
            "lambda_min": lv.certificate.lambda_min,
            "escaped": lv.escaped,
        }
        for lv in st.levels
    ]
    report = RunReport(
        dataset=dataset,
        n=g.n,
        n_l=g.n_l,
        m=g.m,
        m_l=g.m_l,
        objective=sol.objective,
        certificate=sol.certificate.as_dict(),
        timings=timings,
        final_rank=st.rank,
        levels=levels,
        config=_config_echo(cfg, sc),
    )
    return SolveResult(sol, st, report, {"staircase_status": st.certificate.status})


def gauge_align(rotations, translations, landmarks, ref_rotations, ref_translations, ref_landmarks=None):
    """Express an estimate in the frame of pose 0 of a reference: returns the max abs deviation."""
    z0 = ref_rotations[0] * np.conj(rotations[0])
    z = rotations * z0
    t = (translations - translations[0]) * z0 + ref_translations[0]
    err = max(np.max(np.abs(z - ref_rotations)), np.max(np.abs(t - ref_translations)))
    if ref_landmarks is not None and len(ref_landmarks):
        s = (landmarks - translations[0]) * z0 + ref_translations[0]
        err = max(err, float(np.max(np.abs(s - ref_landmarks))))
    return float(err)
