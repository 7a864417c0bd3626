import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from helpers import consistent_graph, random_graph

from cplslam.graph import MeasurementGraph, PoseLandmarkEdge, PosePoseEdge
from cplslam.matrices import (
    ReducedQuadraticForm,
    apply,
    build_dense_oracle,
    build_factors,
    build_full,
    build_reduced,
    dense_factors,
)

# Three poses and one landmark; the reduced matrix below was produced by the
# dense projector formula and cross-checked against the Schur complement of
# the full matrix.
SMALL = MeasurementGraph(
    3,
    1,
    (
        PosePoseEdge(0, 1, 1 + 0j, 1j, 1.0, 2.0),
        PosePoseEdge(1, 2, 0.5 - 1j, np.exp(0.5j), 2.0, 1.0),
        PosePoseEdge(0, 2, 1 + 1j, -1 + 0j, 1.0, 1.0),
    ),
    (PoseLandmarkEdge(0, 0, 2 + 0j, 1.0), PoseLandmarkEdge(2, 0, -1j, 3.0)),
)
SMALL_M = np.array(
    [
        [4.103448275862071 + 0j, 0.172413793103448 + 2.344827586206897j, 0.6896551724137931 + 0.5172413793103441j],
        [0.172413793103448 - 2.344827586206897j, 3.603448275862071 + 0j, -0.6706860101662353 + 0.3759772627421343j],
        [0.6896551724137931 - 0.5172413793103441j, -0.6706860101662353 - 0.3759772627421343j, 2.5172413793103456 + 0j],
    ]
)


def test_single_edge_translation_laplacian():
    g = MeasurementGraph(2, 0, (PosePoseEdge(0, 1, 1.0, 1.0, 1.0, 1.0),))
    np.testing.assert_array_equal(build_full(g).L_t.toarray(), [[1, -1], [-1, 1]])


def test_single_edge_factors():
    g = MeasurementGraph(2, 0, (PosePoseEdge(0, 1, 1.0, 1.0, 4.0, 1.0),))
    f = build_factors(g)
    np.testing.assert_array_equal(f.omega, [4.0])
    np.testing.assert_array_equal(f.A.toarray(), [[-1], [1]])


def test_single_edge_reduced_is_rotation_laplacian():
    # one edge: translations absorb the whole translational residual
    g = MeasurementGraph(2, 0, (PosePoseEdge(0, 1, 3 - 1j, 1j, 5.0, 2.0),))
    expected = np.array([[2, 2j], [-2j, 2]])
    np.testing.assert_allclose(build_dense_oracle(g), expected, atol=1e-12)
    np.testing.assert_allclose(ReducedQuadraticForm(g).dense(), expected, atol=1e-12)
    assert np.linalg.matrix_rank(expected) == 1


def test_frozen_small_instance():
    np.testing.assert_allclose(build_dense_oracle(SMALL), SMALL_M, atol=1e-12)
    np.testing.assert_allclose(ReducedQuadraticForm(SMALL).dense(), SMALL_M, atol=1e-12)
    full = build_full(SMALL)
    Lam = full.Lambda.toarray()
    Th = full.Theta.toarray()
    schur = (full.L_z + full.Sigma_z).toarray() - Th.conj().T @ np.linalg.pinv(Lam) @ Th
    np.testing.assert_allclose(schur, SMALL_M, atol=1e-12)


def test_gamma_is_hermitian_and_matches_objective(rng):
    g = random_graph(rng, 6, 2)
    G = build_full(g).gamma.toarray()
    assert np.abs(G - G.conj().T).max() <= 1e-14
    for _ in range(100):
        xi = rng.normal(size=G.shape[0]) + 1j * rng.normal(size=G.shape[0])
        s, t, z = xi[:2], xi[2:8], xi[8:]
        direct = g.objective(z, t, s)
        assert (xi.conj() @ G @ xi).real == pytest.approx(direct, rel=1e-10)


def test_gamma_vanishes_at_noiseless_truth(rng):
    g, z, t, s = consistent_graph(rng, 7, 3)
    xi = np.concatenate([s, t, z])
    G = build_full(g).gamma
    assert abs(xi.conj() @ (G @ xi)) <= 1e-10


def test_factor_identities(rng):
    g = random_graph(rng, 9, 3)
    full = build_full(g)
    B1, B2, B3 = dense_factors(g)
    np.testing.assert_allclose(B1.T @ B1, full.Lambda.toarray(), atol=1e-12)
    np.testing.assert_allclose(B1.T @ B2, full.Theta.toarray(), atol=1e-12)
    np.testing.assert_allclose(B3.conj().T @ B3, full.L_z.toarray(), atol=1e-12)
    f = build_factors(g)
    np.testing.assert_allclose(f.B1.toarray(), B1, atol=1e-15)
    np.testing.assert_allclose(f.B2.toarray(), B2, atol=1e-15)
    np.testing.assert_allclose(f.B3.toarray(), B3, atol=1e-15)


def test_index_out_of_range_is_rejected():
    g = MeasurementGraph(2, 0, (PosePoseEdge(0, 3, 1, 1, 1, 1),))
    with pytest.raises(IndexError):
        build_full(g)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 20), st.integers(0, 6))
def test_apply_matches_dense_oracle(seed, n, n_l):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, n, n_l)
    form = build_reduced(g)
    np.testing.assert_allclose(apply(form, np.eye(n, dtype=complex)), build_dense_oracle(g), atol=1e-9, rtol=0)


def test_apply_zero_and_dimension_check(rng):
    form = build_reduced(random_graph(rng, 5, 1))
    assert not np.any(form.apply(np.zeros((5, 2), complex)))
    with pytest.raises(ValueError):
        form.apply(np.zeros((4, 1)))


def test_noiseless_truth_is_in_the_kernel(rng):
    g, z, _, _ = consistent_graph(rng, 12, 4)
    assert np.linalg.norm(build_reduced(g).apply(z)) <= 1e-9


def test_operator_properties(rng):
    g = random_graph(rng, 15, 4)
    form = build_reduced(g)
    X = rng.normal(size=(15, 3)) + 1j * rng.normal(size=(15, 3))
    Y = rng.normal(size=(15, 3)) + 1j * rng.normal(size=(15, 3))
    a, b = 0.7 - 0.2j, -1.3 + 2j
    lhs = form.apply(a * X + b * Y)
    assert np.abs(lhs - a * form.apply(X) - b * form.apply(Y)).max() <= 1e-12 * max(1, np.abs(lhs).max())
    assert abs(np.vdot(X, form.apply(Y)) - np.vdot(form.apply(X), Y)) <= 1e-10 * np.abs(np.vdot(X, form.apply(Y)))
    for _ in range(20):
        z = rng.normal(size=15) + 1j * rng.normal(size=15)
        assert np.vdot(z, form.apply(z)).real >= -1e-9 * np.vdot(z, z).real
    z = np.exp(1j * rng.normal(size=15))
    F = form.objective(z)
    assert form.objective(np.exp(0.83j) * z) == pytest.approx(F, rel=1e-10)


def test_projection_properties(rng):
    g = random_graph(rng, 12, 3)
    form = build_reduced(g)
    rows = g.m + g.m_l
    u = rng.normal(size=rows) + 1j * rng.normal(size=rows)
    pu = form.project(u)
    assert np.linalg.norm(form.project(pu) - pu) <= 1e-10 * np.linalg.norm(u)
    w = rng.normal(size=g.n + g.n_l)
    assert np.linalg.norm(form.project(form.B1 @ w)) <= 1e-9 * np.linalg.norm(w)


def test_objective_is_sum_of_squares_form(rng):
    g = random_graph(rng, 10, 2)
    form = build_reduced(g)
    Y = rng.normal(size=(10, 2)) + 1j * rng.normal(size=(10, 2))
    assert form.objective(Y) == pytest.approx(np.vdot(Y, form.apply(Y)).real, rel=1e-12)


def test_elimination_identity(rng):
    # z^H M z equals the full objective minimized over landmarks and translations
    for _ in range(10):
        g = random_graph(rng, int(rng.integers(3, 15)), int(rng.integers(0, 5)))
        form = build_reduced(g)
        G = build_full(g).gamma.toarray()
        k = g.n_l + g.n
        z = np.exp(1j * rng.uniform(-np.pi, np.pi, g.n))
        # minimize [b; z]^H G [b; z] over b densely
        b = -np.linalg.lstsq(G[:k, :k], G[:k, k:] @ z, rcond=None)[0]
        xi = np.concatenate([b, z])
        inner_min = (xi.conj() @ G @ xi).real
        assert form.objective(z) == pytest.approx(inner_min, rel=1e-8)
        beta = form.recover(z)
        assert g.objective(z, beta[g.n_l:], beta[: g.n_l]) == pytest.approx(inner_min, rel=1e-8)


def test_dense_oracle_size_guard():
    big = MeasurementGraph(2001, 0, tuple(PosePoseEdge(k, k + 1, 1, 1, 1, 1) for k in range(2000)))
    with pytest.raises(ValueError):
        build_dense_oracle(big)


def test_laplacian_factor_is_reused(rng):
    form = build_reduced(random_graph(rng, 8, 2))
    fac = form.anchored_laplacian_factor
    form.apply(np.ones((8, 1), complex))
    assert form.anchored_laplacian_factor is fac
    assert sp.issparse(form.rot_laplacian)
