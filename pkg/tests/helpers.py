"""Shared builders for small random measurement graphs."""

from __future__ import annotations

import numpy as np

from cplslam.graph import MeasurementGraph, PoseLandmarkEdge, PosePoseEdge


def random_graph(rng: np.random.Generator, n: int, n_l: int = 0, extra: int = 3, noise: float = 0.3) -> MeasurementGraph:
    """Connected graph: a random spanning tree plus ``extra`` loop closures."""
    pose_edges = []
    for j in range(1, n):
        i = int(rng.integers(j))
        pose_edges.append(_edge(rng, i, j, noise))
    for _ in range(extra if n > 2 else 0):
        i, j = rng.choice(n, size=2, replace=False)
        pose_edges.append(_edge(rng, int(i), int(j), noise))
    lm_edges = []
    for j in range(n_l):
        for i in rng.choice(n, size=int(rng.integers(1, 4)), replace=True):
            lm_edges.append(PoseLandmarkEdge(int(i), j, complex(*rng.normal(size=2) * 2), float(rng.uniform(0.5, 5))))
    return MeasurementGraph(n, n_l, tuple(pose_edges), tuple(lm_edges))


def _edge(rng, i, j, noise):
    return PosePoseEdge(
        i,
        j,
        complex(*rng.normal(size=2)),
        np.exp(1j * rng.uniform(-np.pi, np.pi)),
        float(rng.uniform(0.5, 5)),
        float(rng.uniform(0.5, 5)),
    )


def consistent_graph(rng: np.random.Generator, n: int, n_l: int = 0, extra: int = 3):
    """Noise-free graph plus its ground truth ``(z, t, s)``."""
    z = np.exp(1j * rng.uniform(-np.pi, np.pi, n))
    t = rng.normal(size=n) + 1j * rng.normal(size=n)
    s = rng.normal(size=n_l) * 3 + 1j * rng.normal(size=n_l) * 3
    pairs = [(int(rng.integers(j)), j) for j in range(1, n)]
    for _ in range(extra if n > 2 else 0):
        i, j = rng.choice(n, size=2, replace=False)
        pairs.append((int(i), int(j)))
    pe = [
        PosePoseEdge(i, j, np.conj(z[i]) * (t[j] - t[i]), np.conj(z[i]) * z[j], float(rng.uniform(1, 3)), float(rng.uniform(1, 3)))
        for i, j in pairs
    ]
    le = []
    for j in range(n_l):
        for i in rng.choice(n, size=2, replace=False):
            le.append(PoseLandmarkEdge(int(i), j, np.conj(z[i]) * (s[j] - t[i]), float(rng.uniform(1, 3))))
    return MeasurementGraph(n, n_l, tuple(pe), tuple(le)), z, t, s


def gauge_error(z, t, s, z_ref, t_ref, s_ref=None) -> float:
    """Max deviation after aligning pose 0 of the estimate with pose 0 of the reference."""
    a = z_ref[0] * np.conj(z[0])
    err = max(np.abs(z * a - z_ref).max(), np.abs((t - t[0]) * a + t_ref[0] - t_ref).max())
    if s_ref is not None and len(s_ref):
        err = max(err, np.abs((s - t[0]) * a + t_ref[0] - s_ref).max())
    return float(err)


def ring_saddle(n: int = 10, total_turn: float = 0.8 * np.pi):
    """Rotation ring whose measurements wind by ``total_turn`` in total.

    Translations are uninformative (zero measured offsets), so the cost is
    the rotation ring alone.  The uniform configuration winding once around
    the circle, ``z_k = exp(2 pi i k / n)``, is a first-order critical point
    that is not a minimum.
    """
    zm = np.exp(1j * total_turn / n)
    edges = tuple(PosePoseEdge(k, (k + 1) % n, 0j, zm, 1.0, 1.0) for k in range(n))
    g = MeasurementGraph(n, 0, edges)
    saddle = np.exp(2j * np.pi * np.arange(n) / n)
    return g, saddle
