"""Initial rotation estimates."""

from __future__ import annotations

import logging
from collections import deque

import numpy as np

from .graph import MeasurementGraph
from .matrices import AnchoredSolver, FactorizationError, build_factors

log = logging.getLogger(__name__)


def odometric_init(g: MeasurementGraph, root: int = 0, order: str = "bfs") -> np.ndarray:
    """Compose rotation measurements along a spanning tree rooted at ``root``.

    ``order`` selects the traversal (``"bfs"`` or ``"dfs"``), which changes
    the tree when the graph has cycles.
    """
    adj: list[list[tuple[int, complex]]] = [[] for _ in range(g.n)]
    for e in g.pose_edges:
        adj[e.i].append((e.j, e.z_meas))
        adj[e.j].append((e.i, np.conj(e.z_meas)))
    z = np.zeros(g.n, dtype=complex)
    z[root] = 1.0
    seen = np.zeros(g.n, dtype=bool)
    seen[root] = True
    frontier = deque([root])
    while frontier:
        a = frontier.popleft() if order == "bfs" else frontier.pop()
        for b, zab in adj[a]:
            if not seen[b]:
                seen[b] = True
                z[b] = z[a] * zab
                frontier.append(b)
    if not seen.all():
        log.warning("odometric init: %d poses unreachable through pose-pose edges", int((~seen).sum()))
        z[~seen] = 1.0
    return z / np.abs(z)


def chordal_init(g: MeasurementGraph) -> np.ndarray:
    """Rotations from the linear system ``L z = 0`` with ``z_0 = 1``, then normalized."""
    try:
        B3 = build_factors(g).B3
        L = (B3.conj().T @ B3).tocsr()
        solver = AnchoredSolver(L, pinned=(0,))
        rhs = -np.asarray(L[:, 0].todense()).ravel()
        z = solver.solve(rhs)
        z[0] = 1.0
        mag = np.abs(z)
        if not np.all(np.isfinite(z)) or np.any(mag < 1e-12 * max(mag.max(), 1.0)):
            raise FactorizationError("degenerate chordal solution")
        return z / mag
    except (FactorizationError, ValueError, RuntimeError) as exc:
        log.warning("chordal init failed (%s); falling back to odometric init", exc)
        return odometric_init(g)


def initialize(g: MeasurementGraph, method: str = "chordal") -> np.ndarray:
    if method == "chordal":
        return chordal_init(g)
    if method in ("odometry", "odometric"):
        return odometric_init(g)
    raise ValueError(f"unknown initialization {method!r}")
