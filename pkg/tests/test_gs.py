"""Score and sandwich-statistic checks: finite-difference oracles for
the derivatives, a hand-computed bundle, closed-form invariants of the
quadratic form, and the dense-inverse dual route."""

import numpy as np
import pytest

from hawkes_gof.asymptotics import chi2_cdf
from hawkes_gof.em import em_fit_full, em_fit_null
from hawkes_gof.errors import (
    DimensionMismatch,
    DomainError,
    SingularCovariance,
)
from hawkes_gof.gs import (
    GSResult,
    aggregate_bundles,
    constraint_matrix,
    gs_statistic,
    gw_statistic,
    score_and_hessian,
)
from hawkes_gof.kernels import BinGrid, ExponentialKernel, HawkesModel
from hawkes_gof.likelihood import FullParams, NullParams, loglik_full
from hawkes_gof.sequences import LabeledSequence
from hawkes_gof.simulate import simulate_dataset

GRID = BinGrid((0.0, 0.2, 0.6, 2.0))


def _params_from_theta(theta, grid):
    n = grid.n_bins
    return FullParams(mu=theta[0], phi1=theta[1:1 + n],
                      phi2=theta[1 + n:], grid=grid)


def _random_interior_params(rng, grid):
    """Heights bounded away from 0 so FD steps stay inside the domain."""
    w = grid.widths
    phi1 = rng.uniform(0.3, 1.0, size=grid.n_bins)
    phi2 = rng.uniform(0.3, 1.0, size=grid.n_bins)
    phi1 *= rng.uniform(0.3, 0.8) / (phi1 @ w)
    phi2 *= rng.uniform(0.3, 0.8) / (phi2 @ w)
    return FullParams(mu=rng.uniform(0.5, 3.0), phi1=phi1, phi2=phi2,
                      grid=grid)


def _random_seq(rng, horizon=4.0, rate=3.0):
    times = np.unique(np.sort(rng.uniform(0.0, horizon,
                                          size=rng.poisson(rate * horizon))))
    labels = rng.integers(1, 3, size=times.size)
    return LabeledSequence(id="r", horizon=horizon, times=times, labels=labels)


def _labeled_dataset(master_seed, n_seqs, horizon=4.0, mu=8.0,
                     amplitude=2.0, decay=4.0):
    model = HawkesModel(mu=mu, kernel=ExponentialKernel(amplitude=amplitude,
                                                        decay=decay))
    out = []
    for s, seq in enumerate(simulate_dataset(model, horizon, n_seqs,
                                             master_seed)):
        labels = 1 + (np.arange(seq.n_events) + s) % 2
        out.append(LabeledSequence(id=seq.id, horizon=seq.horizon,
                                   times=seq.times, labels=labels))
    return out


# ---------------------------------------------------------------------------
# finite-difference oracles


def _fd_gradient(theta, seq, grid, h=1e-5):
    out = np.empty(theta.size)
    for j in range(theta.size):
        step = h * max(1.0, abs(theta[j]))
        up, dn = theta.copy(), theta.copy()
        up[j] += step
        dn[j] -= step
        out[j] = (loglik_full(_params_from_theta(up, grid), seq)
                  - loglik_full(_params_from_theta(dn, grid), seq)) / (2 * step)
    return out


def test_score_matches_finite_differences():
    rng = np.random.default_rng(61)
    for _ in range(10):
        params = _random_interior_params(rng, GRID)
        seq = _random_seq(rng)
        score, _ = score_and_hessian(params, seq)
        fd = _fd_gradient(params.theta, seq, GRID)
        denom = max(1.0, float(np.max(np.abs(score))))
        assert np.max(np.abs(fd - score)) / denom < 1e-5


def test_hessian_matches_finite_differences():
    rng = np.random.default_rng(67)
    for _ in range(10):
        params = _random_interior_params(rng, GRID)
        seq = _random_seq(rng)
        _, neg_h = score_and_hessian(params, seq)
        theta = params.theta
        fd = np.empty((theta.size, theta.size))
        for j in range(theta.size):
            step = 1e-5 * max(1.0, abs(theta[j]))
            up, dn = theta.copy(), theta.copy()
            up[j] += step
            dn[j] -= step
            su, _ = score_and_hessian(_params_from_theta(up, GRID), seq)
            sd, _ = score_and_hessian(_params_from_theta(dn, GRID), seq)
            fd[:, j] = (su - sd) / (2 * step)
        denom = max(1.0, float(np.max(np.abs(neg_h))))
        assert np.max(np.abs(fd + neg_h)) / denom < 1e-4
        # PSD by construction
        eig = np.linalg.eigvalsh(0.5 * (neg_h + neg_h.T))
        assert eig.min() > -1e-10


def test_poisson_mu_score_vanishes_at_mle():
    rng = np.random.default_rng(71)
    zero = np.zeros(GRID.n_bins)
    seqs = [_random_seq(rng, horizon=3.0) for _ in range(4)]
    n_total = sum(s.n_events for s in seqs)
    t_total = sum(s.horizon for s in seqs)
    params = FullParams(mu=n_total / t_total, phi1=zero, phi2=zero, grid=GRID)
    total = sum(score_and_hessian(params, s)[0][0] for s in seqs)
    assert total == pytest.approx(0.0, abs=1e-10)


def test_score_hand_instance():
    params = FullParams(
        mu=1.5,
        phi1=np.array([0.8, 0.3, 0.05]),
        phi2=np.array([0.6, 0.5, 0.1]),
        grid=GRID,
    )
    seq = LabeledSequence(id="hand", horizon=2.0,
                          times=np.array([0.3, 0.8, 1.7]),
                          labels=np.array([1, 2, 1]))
    score, neg_h = score_and_hessian(params, seq)
    i1, i2, i3 = 1 / 1.5, 1 / 1.8, 1 / 1.65
    expected = np.array([
        i1 + i2 + i3 - 2.0,
        -0.4, i2 - 0.5, i3 - 1.1,
        -0.2, -0.4, i3 - 0.6,
    ])
    assert score == pytest.approx(expected, rel=1e-12, abs=1e-12)
    rows = np.array([
        [1, 0, 0, 0, 0, 0, 0],
        [1, 0, 1, 0, 0, 0, 0],
        [1, 0, 0, 1, 0, 0, 1],
    ], dtype=float)
    deltas = np.array([1.5, 1.8, 1.65])
    expected_h = sum(np.outer(r, r) / d**2 for r, d in zip(rows, deltas))
    assert neg_h == pytest.approx(expected_h, rel=1e-12)


# ---------------------------------------------------------------------------
# aggregation and the constraint matrix


def test_aggregate_bundles_sums():
    rng = np.random.default_rng(73)
    pairs = []
    for _ in range(3):
        s = rng.normal(size=5)
        b = rng.normal(size=(5, 5))
        pairs.append((s, b @ b.T))
    bundle = aggregate_bundles(pairs)
    assert bundle.n_seqs == 3 and bundle.dim == 5
    assert bundle.score == pytest.approx(sum(s for s, _ in pairs))
    assert bundle.outer == pytest.approx(
        sum(np.outer(s, s) for s, _ in pairs))
    assert bundle.neg_hessian == pytest.approx(sum(b for _, b in pairs))


def test_aggregate_bundles_validation():
    with pytest.raises(DimensionMismatch):
        aggregate_bundles([])
    good = (np.ones(3), np.eye(3))
    with pytest.raises(DimensionMismatch):
        aggregate_bundles([good, (np.ones(4), np.eye(4))])
    with pytest.raises(DimensionMismatch):
        aggregate_bundles([good, (np.ones(3), np.eye(4))])


def test_constraint_matrix_reads_height_difference():
    rng = np.random.default_rng(79)
    for n in (1, 3, 14):
        h = constraint_matrix(n)
        assert h.shape == (n, 1 + 2 * n)
        theta = rng.normal(size=1 + 2 * n)
        assert h @ theta == pytest.approx(theta[1:n + 1] - theta[n + 1:])


# ---------------------------------------------------------------------------
# the statistic


def _fit_and_stat(seqs, grid=GRID, **kw):
    fit = em_fit_null(seqs, grid, tol=1e-4, max_iter=300)
    return fit.params, gs_statistic(fit.params, seqs, **kw)


def test_gs_dense_inverse_dual_route():
    seqs = _labeled_dataset(master_seed=81, n_seqs=8)
    null, res = _fit_and_stat(seqs)
    full = null.embed()
    pairs = [score_and_hessian(full, s) for s in seqs]
    bundle = aggregate_bundles(pairs)
    h = constraint_matrix(GRID.n_bins)
    b_inv = np.linalg.inv(bundle.neg_hessian)
    y = h @ b_inv @ bundle.score
    sigma = h @ b_inv @ bundle.outer @ b_inv @ h.T
    direct = float(y @ np.linalg.inv(sigma) @ y)
    assert res.statistic == pytest.approx(direct, rel=1e-8)
    assert res.kind == "GS" and res.dof == GRID.n_bins
    assert (res.p_value < 0.05) == res.reject
    assert res.p_value == pytest.approx(
        1.0 - chi2_cdf(res.statistic, res.dof), abs=1e-12)


def test_gw_dense_inverse_dual_route():
    seqs = _labeled_dataset(master_seed=83, n_seqs=8)
    fit = em_fit_full(seqs, GRID, tol=1e-4, max_iter=300)
    res = gw_statistic(fit.params, seqs)
    full = fit.params.embed()
    pairs = [score_and_hessian(full, s) for s in seqs]
    bundle = aggregate_bundles(pairs)
    h = constraint_matrix(GRID.n_bins)
    b_inv = np.linalg.inv(bundle.neg_hessian)
    sigma = h @ b_inv @ bundle.outer @ b_inv @ h.T
    d = full.height_difference()
    direct = float(d @ np.linalg.inv(sigma) @ d)
    assert res.statistic == pytest.approx(direct, rel=1e-8)
    assert res.kind == "GW"
    # the FullParams route is the same computation
    res2 = gw_statistic(full, seqs)
    assert res2.statistic == res.statistic


def test_gs_bounded_by_sequence_count():
    # GS = (sum y_i)' (sum y_i y_i')^{-1} (sum y_i) <= n by Cauchy-Schwarz;
    # this bound is what caps power when n is small relative to the grid
    for master_seed in range(10):
        seqs = _labeled_dataset(master_seed=900 + master_seed, n_seqs=5)
        _, res = _fit_and_stat(seqs)
        assert 0.0 <= res.statistic <= len(seqs) + 1e-6


def test_gs_label_swap_invariance():
    seqs = _labeled_dataset(master_seed=87, n_seqs=8)
    swapped = [LabeledSequence(id=s.id, horizon=s.horizon, times=s.times,
                               labels=3 - s.labels) for s in seqs]
    _, res = _fit_and_stat(seqs)
    _, res_sw = _fit_and_stat(swapped)
    assert res_sw.statistic == pytest.approx(res.statistic, rel=1e-8, abs=1e-10)


def test_gw_zero_at_equal_kernels():
    seqs = _labeled_dataset(master_seed=89, n_seqs=8)
    fit = em_fit_null(seqs, GRID, tol=1e-4, max_iter=300)
    res = gw_statistic(fit.params.embed(), seqs)
    assert res.statistic == 0.0
    assert not res.reject
    assert res.p_value == pytest.approx(1.0, abs=1e-12)


def test_too_few_sequences_raises():
    seqs = _labeled_dataset(master_seed=91, n_seqs=2)
    fit = em_fit_null(seqs, GRID, tol=1e-4, max_iter=300)
    with pytest.raises(SingularCovariance):
        gs_statistic(fit.params, seqs)


def test_duplicated_sequences_singular_and_ridge():
    # identical sequences give a rank-1 outer-product matrix; the inner
    # covariance cannot be solved unless a ridge is added
    seqs = _labeled_dataset(master_seed=93, n_seqs=1) * 5
    fit = em_fit_null(seqs, GRID, tol=1e-4, max_iter=300)
    with pytest.raises(SingularCovariance) as err:
        gs_statistic(fit.params, seqs)
    assert "covariance" in str(err.value) or "Hessian" in str(err.value)
    res = gs_statistic(fit.params, seqs, ridge=1e-6)
    assert np.isfinite(res.statistic) and res.statistic >= 0.0


def test_dof_override_changes_reference_only():
    seqs = _labeled_dataset(master_seed=95, n_seqs=8)
    _, res = _fit_and_stat(seqs)
    _, res5 = _fit_and_stat(seqs, dof=5)
    assert res5.statistic == res.statistic
    assert res5.dof == 5
    assert res5.p_value == pytest.approx(
        1.0 - chi2_cdf(res.statistic, 5), abs=1e-12)


def test_level_validation():
    seqs = _labeled_dataset(master_seed=97, n_seqs=8)
    fit = em_fit_null(seqs, GRID, tol=1e-4, max_iter=300)
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(DomainError):
            gs_statistic(fit.params, seqs, level=bad)


def test_result_shape():
    seqs = _labeled_dataset(master_seed=99, n_seqs=8)
    _, res = _fit_and_stat(seqs)
    assert isinstance(res, GSResult)
    assert res.condition_number >= 1.0
    assert 0.0 <= res.p_value <= 1.0
