import numpy as np
import pytest
from helpers import consistent_graph, random_graph, ring_saddle

from cplslam import manifold as mf
from cplslam.initialization import chordal_init
from cplslam.matrices import build_reduced
from cplslam.optimizer import Preconditioner, TrustRegionConfig, precondition, rtr_minimize, tcg_solve


@pytest.mark.parametrize(
    "kwargs",
    [{"accept_rho": 0.3}, {"accept_rho": 0.0}, {"tcg_kappa": 1.0}, {"tcg_theta": 0.0}, {"tcg_theta": 1.5}, {"initial_radius": -1}],
)
def test_config_invariants(kwargs):
    with pytest.raises(ValueError):
        TrustRegionConfig(**kwargs)


def test_precondition_zero_and_shape(rng):
    form = build_reduced(random_graph(rng, 6, 2))
    p = Preconditioner(form)
    assert not np.any(precondition(p, np.zeros((6, 2), complex)))
    with pytest.raises(ValueError):
        precondition(p, np.zeros(5))


def test_precondition_inverts_reduced_operator(rng):
    for _ in range(5):
        g = random_graph(rng, 12, 3)
        form = build_reduced(g)
        p = Preconditioner(form)
        b = rng.normal(size=(12, 2)) + 1j * rng.normal(size=(12, 2))
        a = precondition(p, b)
        assert not np.any(a[0])  # pinned gauge entry
        res = form.apply(a)[1:] - b[1:]
        assert np.linalg.norm(res) <= 1e-6 * np.linalg.norm(b)
        # same as the dense inverse of the pinned reduced matrix
        M = form.dense()
        np.testing.assert_allclose(a[1:], np.linalg.solve(M[1:, 1:], b[1:]), rtol=1e-8, atol=1e-10)


def test_tikhonov_fallback(rng):
    form = build_reduced(random_graph(rng, 10, 2))
    p = Preconditioner(form, tikhonov=1e-8)
    b = rng.normal(size=10) + 1j * rng.normal(size=10)
    a = precondition(p, b)
    assert np.all(np.isfinite(a)) and np.linalg.norm(a) > 0


def test_tcg_zero_gradient(rng):
    form = build_reduced(random_graph(rng, 5))
    Y = mf.random_point(5, 2, rng)
    res = tcg_solve(form, Y, np.zeros_like(Y), 1.0)
    assert res.stop_reason == "residual_tolerance" and not np.any(res.eta)


def tangent_newton(form, z):
    """Dense Newton step in the real coordinates U = i diag(z) a."""
    n = len(z)
    basis = [1j * z[:, None] * np.eye(n)[:, [k]] for k in range(n)]
    H = np.array([[mf.inner(u, mf.riemannian_hessian_vec(form, z, v)) for v in basis] for u in basis])
    gz = mf.riemannian_gradient(form, z)
    gc = np.array([mf.inner(u, gz) for u in basis])
    a = -np.linalg.lstsq(H, gc, rcond=1e-12)[0]
    return sum(ak * u for ak, u in zip(a, basis)), H


def test_tcg_matches_dense_newton_step(rng):
    g = random_graph(rng, 10, 2, noise=0.1)
    form = build_reduced(g)
    z_opt = rtr_minimize(form, chordal_init(g)).Y
    z = mf.retract(z_opt, 1e-2 * mf.random_tangent(z_opt, rng)).ravel()
    step, H = tangent_newton(form, z)
    w = np.linalg.eigvalsh(H)
    assert w[1] > 0  # positive definite away from the phase direction
    cfg = TrustRegionConfig(tcg_kappa=1e-12, tcg_theta=1.0)
    res = tcg_solve(form, z, mf.riemannian_gradient(form, z), 1e6, None, cfg)
    assert np.linalg.norm(res.eta - step) <= 1e-6 * np.linalg.norm(step)


def test_tcg_negative_curvature_at_saddle():
    from cplslam.certify import build_certificate

    g, z = ring_saddle()
    form = build_reduced(g)
    v = build_certificate(form, z).eigvec
    Y = mf.normalize_rows(np.column_stack([z, 1e-3 * v]))
    res = tcg_solve(form, Y, mf.riemannian_gradient(form, Y), 0.5)
    assert res.stop_reason in ("negative_curvature", "boundary")
    assert res.limited_by_radius and res.model_decrease > 0


def test_tcg_steihaug_monotonicity(rng):
    g = random_graph(rng, 30, 5)
    form = build_reduced(g)
    Y = mf.random_point(30, 2, rng)
    p = Preconditioner(form)
    for prec in (None, p):
        for radius in (0.1, 10.0, 1e4):
            res = tcg_solve(form, Y, mf.riemannian_gradient(form, Y), radius, prec)
            assert np.all(np.diff(res.eta_norms) >= -1e-12)
            assert np.all(np.diff(res.model_values) <= 1e-12)
            assert res.model_decrease >= 0
            assert res.eta_norms[-1] <= radius * (1 + 1e-12)


def test_rtr_at_noiseless_truth(rng):
    g, z, _, _ = consistent_graph(rng, 20, 3)
    form = build_reduced(g)
    res = rtr_minimize(form, np.column_stack([z, np.zeros(20)]), Preconditioner(form))
    assert res.iterations <= 1
    assert res.objective <= 1e-9


def test_rtr_random_init_converges(rng):
    g = random_graph(rng, 50, 5)
    form = build_reduced(g)
    p = Preconditioner(form)
    Y0 = mf.random_point(50, 2, rng)
    res = rtr_minimize(form, Y0, p)
    assert res.converged and res.grad_norm <= res.grad_tol
    assert mf.is_on_manifold(res.Y)
    accepted = [rec.objective for rec in res.trace if rec.accepted]
    F = [form.objective(Y0)] + accepted
    assert all(b <= a for a, b in zip(F, F[1:]))


def test_rtr_is_deterministic(rng):
    g = random_graph(rng, 25, 3)
    form = build_reduced(g)
    Y0 = mf.random_point(25, 2, np.random.default_rng(9))
    a = rtr_minimize(form, Y0, Preconditioner(form))
    b = rtr_minimize(form, Y0, Preconditioner(form))
    assert [r.objective for r in a.trace] == [r.objective for r in b.trace]
    np.testing.assert_array_equal(a.Y, b.Y)


def test_preconditioner_does_not_touch_cost_or_gradient(rng):
    g = random_graph(rng, 15, 3)
    form = build_reduced(g)
    Y = mf.random_point(15, 2, rng)
    F0, G0 = form.objective(Y), mf.riemannian_gradient(form, Y)
    p = Preconditioner(form)
    tcg_solve(form, Y, G0, 1.0, p)
    assert form.objective(Y) == F0
    np.testing.assert_array_equal(mf.riemannian_gradient(form, Y), G0)


def test_preconditioning_reduces_inner_iterations():
    from cplslam.synth import TreeParams, generate_tree

    ds = generate_tree(TreeParams(n=1000, n_l=50, seed=2))
    form = build_reduced(ds.graph)
    z0 = chordal_init(ds.graph)
    Y0 = np.column_stack([z0, np.zeros_like(z0)])
    with_p = rtr_minimize(form, Y0, Preconditioner(form))
    without = rtr_minimize(form, Y0, None)
    assert with_p.total_inner_iters < without.total_inner_iters
