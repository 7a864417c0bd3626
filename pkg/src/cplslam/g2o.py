"""Reading and writing 2D g2o files.

Supported records::

    VERTEX_SE2 id x y theta
    VERTEX_XY id x y
    EDGE_SE2 i j dx dy dtheta I11 I12 I13 I22 I23 I33
    EDGE_SE2_XY i j dx dy I11 I12 I22

Information matrices are reduced to isotropic weights: ``tau = 2 / tr(C_t)``
with ``C_t`` the inverse of the translational information block,
``kappa = 1 / C_thth`` from the full 3x3 covariance, and ``nu`` like ``tau``.
"""

from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass, field
from os import PathLike
from typing import IO, Sequence

import numpy as np

from .graph import GraphValidationError, MeasurementGraph, PoseLandmarkEdge, PosePoseEdge, validate

log = logging.getLogger(__name__)

_FIELD_COUNTS = {"VERTEX_SE2": 5, "VERTEX_XY": 4, "EDGE_SE2": 12, "EDGE_SE2_XY": 8}


class G2OParseError(ValueError):
    def __init__(self, lineno: int, message: str):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}")


@dataclass
class G2OData:
    """A parsed g2o file: the graph plus initial guesses and the id mapping."""

    graph: MeasurementGraph
    pose_ids: list[int]
    landmark_ids: list[int]
    initial_translations: np.ndarray | None = None
    initial_rotations: np.ndarray | None = None
    initial_landmarks: np.ndarray | None = None
    skipped_tags: dict[str, int] = field(default_factory=dict)


def translation_weight(I11: float, I12: float, I22: float) -> float:
    info = np.array([[I11, I12], [I12, I22]], dtype=float)
    cov = np.linalg.inv(info)
    return 2.0 / float(np.trace(cov))


def rotation_weight(I: np.ndarray) -> float:
    # 1 / C_thth is the Schur complement of the translational block; this
    # form stays defined when I33 == 0.
    Itt = I[:2, :2]
    b = I[:2, 2]
    return float(I[2, 2] - b @ np.linalg.solve(Itt, b))


def _info3(I11, I12, I13, I22, I23, I33) -> np.ndarray:
    return np.array([[I11, I12, I13], [I12, I22, I23], [I13, I23, I33]], dtype=float)


def parse_g2o(source: str | bytes | PathLike | IO, *, check: bool = True) -> G2OData:
    """Parse g2o text.

    ``source`` may be a path, raw text/bytes, or an open file.  Vertex ids
    are compacted to dense pose and landmark indices in ascending id order.
    """
    text = _read_text(source)
    pose_vertices: dict[int, tuple[float, float, float]] = {}
    landmark_vertices: dict[int, tuple[float, float]] = {}
    raw_pose_edges = []
    raw_lm_edges = []
    skipped: dict[str, int] = {}

    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        tag = tok[0]
        if tag not in _FIELD_COUNTS:
            if tag not in skipped:
                log.warning("line %d: skipping unsupported record %s", lineno, tag)
            skipped[tag] = skipped.get(tag, 0) + 1
            continue
        if len(tok) < _FIELD_COUNTS[tag]:
            raise G2OParseError(lineno, f"{tag} expects {_FIELD_COUNTS[tag] - 1} fields, got {len(tok) - 1}")
        try:
            ids = [int(tok[1])] if tag.startswith("VERTEX") else [int(tok[1]), int(tok[2])]
            vals = [float(x) for x in tok[1 + len(ids):_FIELD_COUNTS[tag]]]
        except ValueError as exc:
            raise G2OParseError(lineno, str(exc)) from None
        if not all(math.isfinite(v) for v in vals):
            raise G2OParseError(lineno, "non-finite value")

        if tag == "VERTEX_SE2":
            pose_vertices[ids[0]] = (vals[0], vals[1], vals[2])
        elif tag == "VERTEX_XY":
            landmark_vertices[ids[0]] = (vals[0], vals[1])
        elif tag == "EDGE_SE2":
            dx, dy, dth, I11, I12, I13, I22, I23, I33 = vals
            try:
                tau = translation_weight(I11, I12, I22)
                kappa = rotation_weight(_info3(I11, I12, I13, I22, I23, I33))
            except np.linalg.LinAlgError:
                raise G2OParseError(lineno, "singular information matrix") from None
            raw_pose_edges.append((lineno, ids[0], ids[1], complex(dx, dy), dth, tau, kappa))
        else:
            dx, dy, I11, I12, I22 = vals
            try:
                nu = translation_weight(I11, I12, I22)
            except np.linalg.LinAlgError:
                raise G2OParseError(lineno, "singular information matrix") from None
            raw_lm_edges.append((lineno, ids[0], ids[1], complex(dx, dy), nu))

    pose_id_set = set(pose_vertices)
    for _, i, j, *_ in raw_pose_edges:
        pose_id_set.update((i, j))
    for _, i, *_ in raw_lm_edges:
        pose_id_set.add(i)
    lm_id_set = set(landmark_vertices)
    for _, _, j, *_ in raw_lm_edges:
        lm_id_set.add(j)
    clash = pose_id_set & lm_id_set
    if clash:
        raise G2OParseError(0, f"ids used both as pose and landmark: {sorted(clash)[:5]}")
    if not pose_id_set:
        raise G2OParseError(0, "no poses found")

    pose_ids = sorted(pose_id_set)
    landmark_ids = sorted(lm_id_set)
    pidx = {v: k for k, v in enumerate(pose_ids)}
    lidx = {v: k for k, v in enumerate(landmark_ids)}

    pose_edges = [
        PosePoseEdge(pidx[i], pidx[j], t, complex(math.cos(th), math.sin(th)), tau, kappa)
        for _, i, j, t, th, tau, kappa in raw_pose_edges
    ]
    lm_edges = [PoseLandmarkEdge(pidx[i], lidx[j], s, nu) for _, i, j, s, nu in raw_lm_edges]
    graph = MeasurementGraph(len(pose_ids), len(landmark_ids), tuple(pose_edges), tuple(lm_edges))

    data = G2OData(graph, pose_ids, landmark_ids, skipped_tags=skipped)
    if pose_vertices and len(pose_vertices) == len(pose_ids):
        xyt = np.array([pose_vertices[v] for v in pose_ids])
        data.initial_translations = xyt[:, 0] + 1j * xyt[:, 1]
        data.initial_rotations = np.exp(1j * xyt[:, 2])
    if landmark_ids and len(landmark_vertices) == len(landmark_ids):
        xy = np.array([landmark_vertices[v] for v in landmark_ids])
        data.initial_landmarks = xy[:, 0] + 1j * xy[:, 1]

    if check:
        errors = [d for d in validate(graph) if d.severity == "error"]
        if errors:
            raise GraphValidationError(errors)
    return data


def _read_text(source) -> str:
    if hasattr(source, "read"):
        content = source.read()
    elif isinstance(source, bytes):
        content = source
    elif isinstance(source, str) and ("\n" in source or source.lstrip().startswith(tuple(_FIELD_COUNTS))):
        content = source
    else:
        with open(source, "rb") as fh:
            content = fh.read()
    if isinstance(content, bytes):
        content = content.decode("utf-8")
    return content


def _fmt(x: float) -> str:
    return repr(float(x))


def write_g2o(
    g: MeasurementGraph,
    translations: Sequence[complex] | None = None,
    rotations: Sequence[complex] | None = None,
    landmarks: Sequence[complex] | None = None,
    *,
    pose_ids: Sequence[int] | None = None,
    landmark_ids: Sequence[int] | None = None,
    dest: str | PathLike | IO | None = None,
) -> str:
    """Serialize a graph and vertex estimates to g2o text.

    Without explicit ids poses are numbered ``0..n-1`` and landmarks follow
    as ``n..n+n_l-1``.  Missing estimates are written as the origin.
    """
    pose_ids = list(range(g.n)) if pose_ids is None else list(pose_ids)
    if landmark_ids is None:
        landmark_ids = list(range(g.n, g.n + g.n_l))
    t = np.zeros(g.n, complex) if translations is None else np.asarray(translations, complex)
    z = np.ones(g.n, complex) if rotations is None else np.asarray(rotations, complex)
    s = np.zeros(g.n_l, complex) if landmarks is None else np.asarray(landmarks, complex)
    if len(t) != g.n or len(z) != g.n or len(s) != g.n_l:
        raise ValueError("estimates must cover every vertex")

    out = io.StringIO()
    for k in range(g.n):
        out.write(f"VERTEX_SE2 {pose_ids[k]} {_fmt(t[k].real)} {_fmt(t[k].imag)} {_fmt(np.angle(z[k]))}\n")
    for k in range(g.n_l):
        out.write(f"VERTEX_XY {landmark_ids[k]} {_fmt(s[k].real)} {_fmt(s[k].imag)}\n")
    for e in g.pose_edges:
        out.write(
            f"EDGE_SE2 {pose_ids[e.i]} {pose_ids[e.j]} {_fmt(e.t_meas.real)} {_fmt(e.t_meas.imag)} "
            f"{_fmt(np.angle(e.z_meas))} {_fmt(e.tau)} 0 0 {_fmt(e.tau)} 0 {_fmt(e.kappa)}\n"
        )
    for e in g.landmark_edges:
        out.write(
            f"EDGE_SE2_XY {pose_ids[e.i]} {landmark_ids[e.j]} {_fmt(e.s_meas.real)} {_fmt(e.s_meas.imag)} "
            f"{_fmt(e.nu)} 0 {_fmt(e.nu)}\n"
        )
    text = out.getvalue()
    if dest is not None:
        if hasattr(dest, "write"):
            dest.write(text)
        else:
            with open(dest, "w") as fh:
                fh.write(text)
    return text
