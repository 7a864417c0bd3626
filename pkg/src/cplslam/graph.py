"""Measurement graph for planar SLAM with pose-pose and pose-landmark edges."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components


class GraphValidationError(ValueError):
    """Raised when a measurement graph violates a structural requirement."""

    def __init__(self, diagnostics: Sequence["Diagnostic"]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(d.message for d in self.diagnostics))


@dataclass(frozen=True)
class PosePoseEdge:
    """Relative pose measurement ``(t_meas, z_meas)`` of pose ``j`` seen from pose ``i``."""

    i: int
    j: int
    t_meas: complex
    z_meas: complex
    tau: float
    kappa: float

    def __post_init__(self):
        z = complex(self.z_meas)
        mag = abs(z)
        if mag == 0 or not math.isfinite(mag):
            raise ValueError(f"rotation measurement of edge ({self.i}, {self.j}) is not a unit complex")
        object.__setattr__(self, "z_meas", z / mag)
        object.__setattr__(self, "t_meas", complex(self.t_meas))


@dataclass(frozen=True)
class PoseLandmarkEdge:
    """Landmark ``j`` observed at ``s_meas`` in the frame of pose ``i``."""

    i: int
    j: int
    s_meas: complex
    nu: float

    def __post_init__(self):
        object.__setattr__(self, "s_meas", complex(self.s_meas))


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    message: str
    severity: str = "error"


@dataclass(frozen=True, eq=False)
class MeasurementGraph:
    """Poses ``0..n-1``, landmarks ``0..n_l-1`` and the measurements between them.

    Edges are held as tuples; the columnar numpy views used by the matrix
    builders are computed once on first access.
    """

    n: int
    n_l: int = 0
    pose_edges: tuple[PosePoseEdge, ...] = field(default_factory=tuple)
    landmark_edges: tuple[PoseLandmarkEdge, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "pose_edges", tuple(self.pose_edges))
        object.__setattr__(self, "landmark_edges", tuple(self.landmark_edges))
        if self.n < 1:
            raise ValueError("a measurement graph needs at least one pose")
        if self.n_l < 0:
            raise ValueError("landmark count must be non-negative")

    @property
    def m(self) -> int:
        return len(self.pose_edges)

    @property
    def m_l(self) -> int:
        return len(self.landmark_edges)

    # columnar views -------------------------------------------------------
    @cached_property
    def pose_arrays(self) -> dict[str, np.ndarray]:
        e = self.pose_edges
        return {
            "i": np.fromiter((x.i for x in e), dtype=np.int64, count=len(e)),
            "j": np.fromiter((x.j for x in e), dtype=np.int64, count=len(e)),
            "t": np.fromiter((x.t_meas for x in e), dtype=complex, count=len(e)),
            "z": np.fromiter((x.z_meas for x in e), dtype=complex, count=len(e)),
            "tau": np.fromiter((x.tau for x in e), dtype=float, count=len(e)),
            "kappa": np.fromiter((x.kappa for x in e), dtype=float, count=len(e)),
        }

    @cached_property
    def landmark_arrays(self) -> dict[str, np.ndarray]:
        e = self.landmark_edges
        return {
            "i": np.fromiter((x.i for x in e), dtype=np.int64, count=len(e)),
            "j": np.fromiter((x.j for x in e), dtype=np.int64, count=len(e)),
            "s": np.fromiter((x.s_meas for x in e), dtype=complex, count=len(e)),
            "nu": np.fromiter((x.nu for x in e), dtype=float, count=len(e)),
        }

    def check(self) -> "MeasurementGraph":
        """Raise :class:`GraphValidationError` if :func:`validate` reports errors."""
        errors = [d for d in validate(self) if d.severity == "error"]
        if errors:
            raise GraphValidationError(errors)
        return self

    def objective(self, rotations, translations, landmarks=None) -> float:
        """Weighted least-squares cost of an estimate, summed edge by edge."""
        return mle_objective(self, rotations, translations, landmarks)


def mle_objective(g: MeasurementGraph, rotations, translations, landmarks=None) -> float:
    z = np.asarray(rotations, dtype=complex)
    t = np.asarray(translations, dtype=complex)
    s = np.zeros(0, dtype=complex) if landmarks is None else np.asarray(landmarks, dtype=complex)
    P = g.pose_arrays
    rot = P["kappa"] * np.abs(z[P["i"]] * P["z"] - z[P["j"]]) ** 2
    tran = P["tau"] * np.abs(t[P["j"]] - t[P["i"]] - z[P["i"]] * P["t"]) ** 2
    total = float(np.sum(rot) + np.sum(tran))
    if g.m_l:
        L = g.landmark_arrays
        total += float(np.sum(L["nu"] * np.abs(s[L["j"]] - t[L["i"]] - z[L["i"]] * L["s"]) ** 2))
    return total


def validate(g: MeasurementGraph) -> list[Diagnostic]:
    """Structural checks; an empty list means the graph is usable."""
    diags: list[Diagnostic] = []
    P, L = g.pose_arrays, g.landmark_arrays

    bad_pose = (P["i"] < 0) | (P["i"] >= g.n) | (P["j"] < 0) | (P["j"] >= g.n)
    bad_lm = (L["i"] < 0) | (L["i"] >= g.n) | (L["j"] < 0) | (L["j"] >= g.n_l)
    for k in np.flatnonzero(bad_pose):
        diags.append(Diagnostic("index", f"pose edge {k} references a pose outside 0..{g.n - 1}"))
    for k in np.flatnonzero(bad_lm):
        diags.append(Diagnostic("index", f"landmark edge {k} references an index out of range"))
    if diags:
        return diags

    for k in np.flatnonzero(P["i"] == P["j"]):
        diags.append(Diagnostic("self_loop", f"pose edge {k} connects pose {P['i'][k]} to itself"))
    for k in np.flatnonzero(~(P["tau"] > 0)):
        diags.append(Diagnostic("weight", f"pose edge {k} has non-positive tau {P['tau'][k]}"))
    for k in np.flatnonzero(~(P["kappa"] >= 0)):
        diags.append(Diagnostic("weight", f"pose edge {k} has negative kappa {P['kappa'][k]}"))
    for k in np.flatnonzero(~(L["nu"] > 0)):
        diags.append(Diagnostic("weight", f"landmark edge {k} has non-positive nu {L['nu'][k]}"))

    observed = np.zeros(g.n_l, dtype=bool)
    observed[L["j"]] = True
    for j in np.flatnonzero(~observed):
        diags.append(Diagnostic("dangling_landmark", f"landmark {j} is never observed"))

    pairs = np.stack([np.minimum(P["i"], P["j"]), np.maximum(P["i"], P["j"])], axis=1)
    if len(pairs):
        _, counts = np.unique(pairs, axis=0, return_counts=True)
        dup = int(np.sum(counts > 1))
        if dup:
            diags.append(Diagnostic("duplicate_edge", f"{dup} pose pairs carry parallel edges", "warning"))

    n_vert = g.n + g.n_l
    if n_vert > 1:
        rows = np.concatenate([P["i"], L["i"]])
        cols = np.concatenate([P["j"], g.n + L["j"]])
        adj = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n_vert, n_vert))
        n_comp, _ = connected_components(adj, directed=False)
        if n_comp > 1:
            diags.append(Diagnostic("disconnected", f"graph is disconnected ({n_comp} components)"))
    return diags


def from_edges(n: int, n_l: int, pose_edges: Iterable, landmark_edges: Iterable = ()) -> MeasurementGraph:
    return MeasurementGraph(n, n_l, tuple(pose_edges), tuple(landmark_edges))
