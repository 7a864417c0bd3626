"""Synthetic City (pose graph) and Tree (pose graph with landmarks) datasets.

The robot walks a rectilinear path on the nodes of a square grid, heading
along the direction of its last move.  Measurements are generated from the
stored ground truth with isotropic Gaussian translation noise and von Mises
rotation noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import MeasurementGraph, PoseLandmarkEdge, PosePoseEdge
from .se2 import UnitComplex

_HEADINGS = np.array([1, 1j, -1, -1j])


def tau_from_sigma(sigma_t: float) -> float:
    return 2.0 / sigma_t**2


def kappa_from_sigma(sigma_r: float) -> float:
    return 1.0 / sigma_r**2


def sigma_from_tau(tau: float) -> float:
    return math.sqrt(2.0 / tau)


def sigma_from_kappa(kappa: float) -> float:
    return 1.0 / math.sqrt(kappa)


def _check_common(n, grid_side, cell_m, weights):
    if n < 1:
        raise ValueError("n must be positive")
    if grid_side < 2:
        raise ValueError("grid_side must be at least 2")
    if not cell_m > 0:
        raise ValueError("cell_m must be positive")
    for name, w in weights.items():
        if not w > 0:
            raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class CityParams:
    n: int = 3000
    grid_side: int = 25
    cell_m: float = 1.0
    p_C: float = 0.1
    tau: float = tau_from_sigma(0.15)
    kappa: float = kappa_from_sigma(0.05 * math.pi)
    seed: int = 0
    noiseless: bool = False
    vmf_convention: str = "rmse"

    def __post_init__(self):
        _check_common(self.n, self.grid_side, self.cell_m, {"tau": self.tau, "kappa": self.kappa})
        if not 0 <= self.p_C <= 1:
            raise ValueError("p_C must lie in [0, 1]")


@dataclass(frozen=True)
class TreeParams:
    n: int = 5000
    n_l: int = 250
    grid_side: int = 25
    cell_m: float = 1.0
    p_L: float = 0.2
    tau: float = tau_from_sigma(0.05)
    kappa: float = kappa_from_sigma(0.015 * math.pi)
    nu: float = tau_from_sigma(0.05)
    seed: int = 0
    visibility_cells: float = 2.0
    noiseless: bool = False
    vmf_convention: str = "rmse"

    def __post_init__(self):
        _check_common(self.n, self.grid_side, self.cell_m, {"tau": self.tau, "kappa": self.kappa, "nu": self.nu})
        if self.n_l < 1:
            raise ValueError("n_l must be at least 1")
        if not 0 < self.p_L <= 1:
            raise ValueError("p_L must lie in (0, 1]")


@dataclass
class SynthDataset:
    graph: MeasurementGraph
    translations: np.ndarray
    rotations: np.ndarray
    landmarks: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    params: object = None


def _concentration(kappa: float, convention: str) -> float:
    # "rmse": angular RMSE ~ kappa^-1/2; "density": exp(kappa (conj(z0) z + z0 conj(z)))
    if convention == "rmse":
        return kappa
    if convention == "density":
        return 2.0 * kappa
    raise ValueError(f"unknown von Mises convention {convention!r}")


def sample_vmf(mode, kappa: float, rng: np.random.Generator, size=None, convention: str = "rmse"):
    """von Mises rotation noise around ``mode``; ``kappa = 0`` is uniform on the circle."""
    if not kappa >= 0:
        raise ValueError("kappa must be non-negative")
    z0 = mode.value if isinstance(mode, UnitComplex) else complex(mode)
    theta = rng.vonmises(0.0, _concentration(kappa, convention), size=size)
    out = z0 * np.exp(1j * theta)
    if size is None:
        return UnitComplex.from_complex(complex(out))
    return out


def sample_translation_noise(tau: float, rng: np.random.Generator, size=None):
    """Complex noise whose real and imaginary parts each have variance ``1/tau``."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    std = 1.0 / math.sqrt(tau)
    re_im = rng.normal(0.0, std, size=(2,) if size is None else (2, *np.atleast_1d(size)))
    out = re_im[0] + 1j * re_im[1]
    return complex(out) if size is None else out


def _walk(n: int, side: int, rng: np.random.Generator):
    """Grid node indices and headings of a rectilinear random walk without U-turns."""
    nodes = np.zeros((n, 2), dtype=np.int64)
    head = np.zeros(n, dtype=np.int64)
    pos = np.array([side // 2, side // 2])
    h = int(rng.integers(4))
    nodes[0], head[0] = pos, h
    steps = np.array([[1, 0], [0, 1], [-1, 0], [0, -1]])
    for k in range(1, n):
        options = [(h + d) % 4 for d in (0, 1, 3)]
        options = [o for o in options if np.all((pos + steps[o] >= 0) & (pos + steps[o] < side))]
        if not options:
            options = [(h + 2) % 4]
        h = options[int(rng.integers(len(options)))]
        pos = pos + steps[h]
        nodes[k], head[k] = pos, h
    return nodes, head


def _trajectory(n, side, cell, rng):
    nodes, head = _walk(n, side, rng)
    t = cell * (nodes[:, 0] + 1j * nodes[:, 1]).astype(complex)
    z = _HEADINGS[head].astype(complex)
    return nodes, t, z


def _pose_edges(pairs, t, z, tau, kappa, rng, noiseless, convention):
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    i, j = pairs[:, 0], pairs[:, 1]
    t_true = np.conj(z[i]) * (t[j] - t[i])
    z_true = np.conj(z[i]) * z[j]
    m = len(pairs)
    if noiseless:
        t_meas, z_meas = t_true, z_true
    else:
        t_meas = t_true + sample_translation_noise(tau, rng, size=m)
        z_meas = sample_vmf(1.0, kappa, rng, size=m, convention=convention) * z_true
    return [PosePoseEdge(int(a), int(b), tm, zm, tau, kappa) for a, b, tm, zm in zip(i, j, t_meas, z_meas)]


def _loop_pairs(nodes, p, rng):
    key = nodes[:, 0] * 100003 + nodes[:, 1]
    order = np.argsort(key, kind="stable")
    pairs = []
    start = 0
    for stop in range(1, len(order) + 1):
        if stop == len(order) or key[order[stop]] != key[order[start]]:
            group = np.sort(order[start:stop])
            for a in range(len(group)):
                for b in range(a + 1, len(group)):
                    if group[b] - group[a] > 1:
                        pairs.append((group[a], group[b]))
            start = stop
    pairs.sort()
    keep = rng.random(len(pairs)) < p
    return [pr for pr, k in zip(pairs, keep) if k]


def generate_city(p: CityParams) -> SynthDataset:
    rng = np.random.default_rng(p.seed)
    nodes, t, z = _trajectory(p.n, p.grid_side, p.cell_m, rng)
    pairs = [(k, k + 1) for k in range(p.n - 1)] + _loop_pairs(nodes, p.p_C, rng)
    edges = _pose_edges(pairs, t, z, p.tau, p.kappa, rng, p.noiseless, p.vmf_convention)
    return SynthDataset(MeasurementGraph(p.n, 0, tuple(edges)), t, z, params=p)


def generate_tree(p: TreeParams, max_attempts: int = 1000) -> SynthDataset:
    """Tree dataset; landmarks sit at centres of cells within sight of the path."""
    rng = np.random.default_rng(p.seed)
    nodes, t, z = _trajectory(p.n, p.grid_side, p.cell_m, rng)
    side = p.grid_side
    cx, cy = np.meshgrid(np.arange(side - 1), np.arange(side - 1), indexing="ij")
    centres = p.cell_m * ((cx.ravel() + 0.5) + 1j * (cy.ravel() + 0.5))
    radius = p.visibility_cells * p.cell_m
    visited = np.unique(t)
    dist = np.abs(centres[:, None] - visited[None, :]).min(axis=1)
    candidates = np.flatnonzero(dist <= radius)
    if len(candidates) < p.n_l:
        raise ValueError(f"only {len(candidates)} cells are visible from the path; cannot place {p.n_l} landmarks")

    for _ in range(max_attempts):
        s = centres[np.sort(rng.choice(candidates, size=p.n_l, replace=False))]
        near = np.abs(t[:, None] - s[None, :]) <= radius + 1e-9
        obs = near & (rng.random(near.shape) < p.p_L)
        if np.all(obs.any(axis=0)):
            break
    else:
        raise RuntimeError("could not generate a Tree dataset observing every landmark")

    pi, lj = np.nonzero(obs)
    s_true = np.conj(z[pi]) * (s[lj] - t[pi])
    s_meas = s_true if p.noiseless else s_true + sample_translation_noise(p.nu, rng, size=len(pi))
    lm_edges = [PoseLandmarkEdge(int(a), int(b), sm, p.nu) for a, b, sm in zip(pi, lj, s_meas)]
    pairs = [(k, k + 1) for k in range(p.n - 1)]
    pose_edges = _pose_edges(pairs, t, z, p.tau, p.kappa, rng, p.noiseless, p.vmf_convention)
    g = MeasurementGraph(p.n, p.n_l, tuple(pose_edges), tuple(lm_edges))
    return SynthDataset(g, t, z, s, params=p)
