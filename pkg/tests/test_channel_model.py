import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from ris_ep.array_geometry import PlanarArrayGeometry, beam_matrix, sampling_angles
from ris_ep.channel_model import (ClusterProfile, CovarianceModel, RisBsChannelParams,
                                  axis_bin_masses, beam_power_profile, build_cluster_models,
                                  build_covariance, draw_ris_bs_params, resolve_beam_conflicts,
                                  ris_bs_channel, sample_covariance, sample_ris_bs_channel,
                                  sample_user_channel, sample_user_channels, truncate_eigenspace,
                                  truncated_laplacian_pdf)
from ris_ep.config import REFERENCE_MEAN_AZIMUTHS
from ris_ep.errors import InfeasibleConfigurationError, InvalidArgumentError

DEG = np.pi / 180


# -- oracle: classify angles by brute force and integrate the density numerically ----------

def _nearest_beam(theta, count):
    c = 1 - 2 * np.arange(count) / count
    d = (np.cos(np.atleast_1d(theta))[:, None] - c[None, :] + 1.0) % 2.0 - 1.0
    return np.argmin(np.abs(d), axis=1)


def oracle_bin_masses(count, mean, sd):
    grid = np.linspace(0, np.pi, 20001)
    labels = _nearest_beam(grid, count)
    cuts = [0.0]
    for i in np.flatnonzero(np.diff(labels)):
        lo, hi = grid[i], grid[i + 1]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if _nearest_beam(mid, count)[0] == labels[i]:
                lo = mid
            else:
                hi = mid
        cuts.append(0.5 * (lo + hi))
    cuts.append(np.pi)
    pdf = lambda x: np.exp(-np.sqrt(2) * abs(x - mean) / sd)
    total = integrate.quad(pdf, 0, np.pi, points=[mean], limit=200)[0]
    mass = np.zeros(count)
    for a, b in zip(cuts[:-1], cuts[1:]):
        beam = _nearest_beam(0.5 * (a + b), count)[0]
        pts = [mean] if a < mean < b else None
        mass[beam] += integrate.quad(pdf, a, b, points=pts, limit=200)[0]
    return mass / total


# -- truncated Laplacian -----------------------------------------------------------------------

def test_pdf_normalised():
    for mean, sd in [(0.3, 0.2), (np.pi / 2, 14 * DEG), (3.0, 2.0)]:
        val = integrate.quad(truncated_laplacian_pdf, 0, np.pi, args=(mean, sd),
                             points=[mean], limit=200)[0]
        assert abs(val - 1.0) < 1e-6


def test_pdf_mode_at_mean():
    x = np.linspace(0, np.pi, 2001, endpoint=False)
    mean = x[700]
    dens = truncated_laplacian_pdf(x, mean, 0.3)
    assert np.argmax(dens) == 700


def test_pdf_decay_ratio():
    sd = 14 * DEG
    r = truncated_laplacian_pdf(np.pi / 2, np.pi / 2, sd) / \
        truncated_laplacian_pdf(np.pi / 2 + sd / np.sqrt(2), np.pi / 2, sd)
    assert abs(r - np.e) < 1e-3
    # the decay length was sd/sqrt(2); at sd*sqrt(2) the ratio is e^2
    r2 = truncated_laplacian_pdf(np.pi / 2, np.pi / 2, sd) / \
        truncated_laplacian_pdf(np.pi / 2 + sd * np.sqrt(2), np.pi / 2, sd)
    assert abs(r2 - np.e ** 2) < 1e-9


def test_pdf_rejects_bad_sd():
    with pytest.raises(InvalidArgumentError):
        truncated_laplacian_pdf(1.0, 1.0, 0.0)
    with pytest.raises(InvalidArgumentError):
        axis_bin_masses(4, 1.0, -1.0)


def test_pdf_zero_outside_support():
    assert truncated_laplacian_pdf(-0.1, 0.5, 0.2) == 0.0
    assert truncated_laplacian_pdf(np.pi, 0.5, 0.2) == 0.0


# -- beam power profile ----------------------------------------------------------------------

@pytest.mark.parametrize("count,mean,sd", [(4, 1.0, 0.3), (8, 0.9273, 14 * DEG),
                                           (16, 20 * DEG, 2 * DEG), (16, 2.2143, 14 * DEG),
                                           (4, np.pi / 2, 100.0), (5, 0.1, 0.05)])
def test_bin_masses_match_quadrature(count, mean, sd):
    np.testing.assert_allclose(axis_bin_masses(count, mean, sd),
                               oracle_bin_masses(count, mean, sd), atol=1e-8)


def test_wide_pas_follows_angle_measure():
    # a flat density on [0, pi) is not flat in the cosine domain, so the
    # bins near broadside (narrow in angle) hold less than 1/N each
    g = PlanarArrayGeometry(4, 4)
    lam = beam_power_profile(ClusterProfile(np.pi / 2, np.pi / 2, 100.0, 100.0), g)
    axis = oracle_bin_masses(4, np.pi / 2, 100.0)
    np.testing.assert_allclose(lam, 16 * np.kron(axis, axis), rtol=1e-7)
    # the limiting angle measure: bin 0 holds 2 arccos(3/4) / pi + ...
    flat = np.diff(np.concatenate(([0.0], np.arccos([0.75, 0.25, -0.25, -0.75]), [np.pi])))
    flat = np.array([flat[0] + flat[4], flat[1], flat[2], flat[3]]) / np.pi
    np.testing.assert_allclose(axis, flat, rtol=2e-2)
    np.testing.assert_allclose(flat, [0.4601, 0.1895, 0.1609, 0.1895], atol=1e-4)
    np.testing.assert_allclose(axis, [0.4573, 0.1901, 0.1624, 0.1901], atol=1e-4)


def test_profile_sums_to_trace():
    g = PlanarArrayGeometry(8, 4)
    lam = beam_power_profile(ClusterProfile(1.2, 0.4, 0.2, 0.1), g, trace_norm=7.5)
    assert abs(lam.sum() - 7.5) < 1e-9
    assert np.all(lam > 0)
    assert abs(beam_power_profile(ClusterProfile(1.2, 0.4, 0.2, 0.1), g).sum() - 32) < 1e-9


@pytest.mark.parametrize("ih,iv", [(1, 2), (2, 1), (3, 3)])
def test_narrow_pas_collapses(ih, iv):
    g = PlanarArrayGeometry(4, 4)
    a = sampling_angles(4)
    lam = beam_power_profile(ClusterProfile(a[ih], a[iv], 0.001, 0.001), g)
    assert lam.max() >= 0.999 * 16
    assert np.argmax(lam) == iv * 4 + ih


@given(st.floats(0.0, np.pi - 1e-3), st.floats(0.0, np.pi - 1e-3),
       st.floats(1e-3, 3.0), st.floats(1e-3, 3.0),
       st.sampled_from([1, 2, 3, 4, 8, 16]), st.sampled_from([1, 2, 4, 8]))
@settings(max_examples=60, deadline=None)
def test_profile_normalisation_property(ma, me, sa, se, n_h, n_v):
    lam = beam_power_profile(ClusterProfile(ma, me, sa, se), PlanarArrayGeometry(n_h, n_v))
    assert np.all(lam >= 0)
    assert abs(lam.sum() - n_h * n_v) < 1e-9


def test_cluster_profile_validation():
    with pytest.raises(InvalidArgumentError):
        ClusterProfile(np.pi, 0.1, 0.1, 0.1)
    with pytest.raises(InvalidArgumentError):
        ClusterProfile(0.1, 0.1, 0.0, 0.1)
    with pytest.raises(InvalidArgumentError):
        ClusterProfile(0.1, 0.1, 0.1, 0.1, num_users=0)


# -- covariance ----------------------------------------------------------------------------

def test_covariance_identity():
    V = beam_matrix(PlanarArrayGeometry(4, 4))
    np.testing.assert_allclose(build_covariance(np.ones(16), V), np.eye(16), atol=1e-12)


def test_covariance_trace_psd_eigvecs(rng):
    g = PlanarArrayGeometry(4, 4)
    V = beam_matrix(g)
    lam = beam_power_profile(ClusterProfile(1.0, 0.7, 0.3, 0.2), g)
    R = build_covariance(lam, V)
    assert abs(np.trace(R).real - lam.sum()) < 1e-9
    assert np.abs(R - R.conj().T).max() < 1e-12
    assert np.linalg.eigvalsh(R).min() >= -1e-10 * lam.sum()
    for n in range(16):
        assert np.linalg.norm(R @ V[:, n] - lam[n] * V[:, n]) < 1e-9
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(R)), np.sort(lam), atol=1e-10)


def test_covariance_rejects_negative():
    V = beam_matrix(PlanarArrayGeometry(2, 1))
    with pytest.raises(InvalidArgumentError):
        build_covariance([1.0, -0.1], V)
    with pytest.raises(InvalidArgumentError):
        build_covariance([1.0, 1.0, 1.0], V)


# -- truncation ----------------------------------------------------------------------------

def test_truncate_fixed():
    np.testing.assert_array_equal(truncate_eigenspace([4, 3, 2, 1], dimension=2), [0, 1])
    np.testing.assert_array_equal(truncate_eigenspace([1, 3, 2, 4], dimension=2), [3, 1])


def test_truncate_energy():
    np.testing.assert_array_equal(truncate_eigenspace([4, 3, 2, 1], energy_fraction=0.69), [0, 1])
    np.testing.assert_array_equal(truncate_eigenspace([4, 3, 2, 1], energy_fraction=0.7), [0, 1])
    np.testing.assert_array_equal(truncate_eigenspace([4, 3, 2, 1], energy_fraction=0.71),
                                  [0, 1, 2])
    assert truncate_eigenspace([4, 3, 2, 1], energy_fraction=1.0).size == 4


def test_truncate_ties_to_lower_index():
    np.testing.assert_array_equal(truncate_eigenspace(np.ones(6), dimension=3), [0, 1, 2])


def test_truncate_errors():
    with pytest.raises(InvalidArgumentError):
        truncate_eigenspace([1, 2], dimension=3)
    with pytest.raises(InvalidArgumentError):
        truncate_eigenspace([1, 2], energy_fraction=0.0)
    with pytest.raises(InvalidArgumentError):
        truncate_eigenspace([1, 2])


# -- conflict resolution -------------------------------------------------------------------

def test_conflicts_disjoint_unchanged():
    e = np.arange(8, 0, -1.0)
    out = resolve_beam_conflicts([(e, [0, 1]), (e[::-1], [7, 6])])
    np.testing.assert_array_equal(out[0], [0, 1])
    np.testing.assert_array_equal(out[1], [7, 6])


def test_conflict_goes_to_larger_eigenvalue():
    e1 = np.array([0, 0, 0, 0, 0, 3.0, 1.0, 0.5])
    e2 = np.array([0, 0, 0, 0, 0.1, 2.0, 0.2, 0.9])
    out = resolve_beam_conflicts([(e1, [5]), (e2, [5])])
    np.testing.assert_array_equal(out[0], [5])
    np.testing.assert_array_equal(out[1], [7])  # next best of cluster 2


def test_conflict_tie_to_lower_cluster():
    e = np.array([1.0, 1.0, 0.5])
    out = resolve_beam_conflicts([(e, [0]), (e, [0])])
    np.testing.assert_array_equal(out[0], [0])
    np.testing.assert_array_equal(out[1], [1])


def test_conflict_infeasible():
    e = np.ones(3)
    with pytest.raises(InfeasibleConfigurationError):
        resolve_beam_conflicts([(e, [0, 1]), (e, [1, 2])])
    with pytest.raises(InfeasibleConfigurationError):
        build_cluster_models([ClusterProfile(1, 1, 1, 1)] * 2, PlanarArrayGeometry(2, 2),
                             dimensions=3)


@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 5), st.integers(1, 3))
@settings(max_examples=60, deadline=None)
def test_conflicts_property(seed, clusters, dim):
    r = np.random.default_rng(seed)
    n = 16
    eigs = [r.exponential(size=n) * (r.random(n) < 0.7) for _ in range(clusters)]
    kept = [truncate_eigenspace(e, dimension=dim) for e in eigs]
    out = resolve_beam_conflicts(list(zip(eigs, kept)))
    again = resolve_beam_conflicts(list(zip(eigs, kept)))
    flat = np.concatenate(out)
    assert np.unique(flat).size == flat.size
    assert all(o.size == dim for o in out)
    assert all(np.array_equal(a, b) for a, b in zip(out, again))
    for c, o in enumerate(out):
        assert np.all(np.diff(eigs[c][o]) <= 0)
        # uncontested beams are never lost
        others = set(np.concatenate([k for d, k in enumerate(kept) if d != c]).tolist())
        assert {int(b) for b in kept[c] if b not in others} <= set(o.tolist())


def _reference_clusters():
    return [ClusterProfile(a, 20 * DEG, 14 * DEG, 2 * DEG, num_users=2)
            for a in REFERENCE_MEAN_AZIMUTHS]


def test_reference_clusters_contest_some_beams():
    # under the nearest-cosine binning the four reference clusters, each
    # keeping its top 8 of 256 beams, overlap on a few beams
    g = PlanarArrayGeometry(16, 16)
    eigs = [beam_power_profile(p, g) for p in _reference_clusters()]
    tops = [set(truncate_eigenspace(e, dimension=8).tolist()) for e in eigs]
    contested = set()
    for i in range(4):
        for j in range(i + 1, 4):
            contested |= tops[i] & tops[j]
    assert contested == {5, 8, 11, 24}
    models = build_cluster_models(_reference_clusters(), g, dimensions=8)
    assert [m.ceded for m in models] == [(5,), (), (8, 24), (11,)]
    np.testing.assert_allclose([m.dropped_fraction() for m in models],
                               [0.182, 0.225, 0.339, 0.182], atol=2e-3)
    flat = np.concatenate([m.kept_beams for m in models])
    assert np.unique(flat).size == 32


def test_cluster_models_invariants():
    g = PlanarArrayGeometry(8, 8)
    models = build_cluster_models(_reference_clusters(), g, dimensions=[8, 8, 8, 8])
    for c, m in enumerate(models):
        assert m.cluster_id == c
        assert abs(m.eigenvalues.sum() - 64) < 1e-9
        assert m.dimension == 8
        # order holds against every beam not ceded to or held by another cluster
        taken = np.concatenate([o.kept_beams for o in models if o is not m])
        inside = m.eigenvalues[m.kept_beams].min()
        outside = np.delete(m.eigenvalues, np.r_[m.kept_beams, list(m.ceded), taken]).max()
        assert inside >= outside
        assert set(m.ceded) <= set(taken.tolist())
    energy = build_cluster_models(_reference_clusters()[:1], g, energy_fraction=0.9)[0]
    assert energy.eigenvalues[energy.kept_beams].sum() >= 0.9 * 64 - 1e-9


# -- sampling ------------------------------------------------------------------------------

def test_zero_eigenvalues_give_zero_channel(rng):
    V = beam_matrix(PlanarArrayGeometry(2, 2))
    cov = CovarianceModel(np.zeros(4), np.array([0]))
    np.testing.assert_array_equal(sample_user_channel(cov, V, rng), np.zeros(4))


def test_sample_covariance_of_draws(rng):
    g = PlanarArrayGeometry(4, 4)
    V = beam_matrix(g)
    lam = beam_power_profile(ClusterProfile(1.1, 0.9, 0.4, 0.4), g)
    cov = CovarianceModel(lam, truncate_eigenspace(lam, dimension=4), trace_norm=16)
    H = sample_user_channels(cov, V, rng, 100_000)
    R = cov.matrix(V)
    assert np.linalg.norm(sample_covariance(H) - R) / np.linalg.norm(R) < 0.05


def test_restricted_draw_in_eigenspace(rng):
    g = PlanarArrayGeometry(4, 4)
    V = beam_matrix(g)
    lam = beam_power_profile(ClusterProfile(1.1, 0.9, 0.4, 0.4), g)
    cov = CovarianceModel(lam, truncate_eigenspace(lam, dimension=5))
    D = V[:, cov.kept_beams]
    for _ in range(20):
        h = sample_user_channel(cov, V, rng, full_spectrum=False)
        assert np.linalg.norm(h - D @ (D.conj().T @ h)) < 1e-12


def test_same_cluster_users_independent(rng):
    g = PlanarArrayGeometry(4, 2)
    V = beam_matrix(g)
    lam = beam_power_profile(ClusterProfile(1.0, 1.0, 0.3, 0.3), g)
    cov = CovarianceModel(lam, np.array([0]))
    draws = np.stack([sample_user_channels(cov, V, rng, 2) for _ in range(100_000)])
    cross = draws[:, 0, :].T @ draws[:, 1, :].conj() / draws.shape[0]
    assert np.linalg.norm(cross) < 0.05 * lam.sum()


def test_sample_covariance_basics(rng):
    h = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    np.testing.assert_allclose(sample_covariance([h]), np.outer(h, h.conj()))
    np.testing.assert_array_equal(sample_covariance(np.zeros((3, 4))), np.zeros((4, 4)))
    S = sample_covariance(rng.standard_normal((10, 4)) + 1j * rng.standard_normal((10, 4)))
    assert np.abs(S - S.conj().T).max() == 0
    assert np.linalg.eigvalsh(S).min() > -1e-12
    with pytest.raises(InvalidArgumentError):
        sample_covariance(np.zeros((0, 4)))


# -- RIS-BS channel ------------------------------------------------------------------------

def test_single_path_rank_one():
    g = PlanarArrayGeometry(4, 4)
    params = RisBsChannelParams(np.array([1.0 + 0j]), np.array([0.7]), np.array([1.3]),
                                np.array([0.4]), m_antennas=8)
    G = ris_bs_channel(params, g)
    assert G.shape == (8, 16)
    assert np.linalg.matrix_rank(G) == 1
    assert abs(np.linalg.norm(G) ** 2 - 8 * 16) < 1e-9


def test_coincident_paths_rank_one(rng):
    g = PlanarArrayGeometry(2, 4)
    gains = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    same = np.full(3, 1.1)
    G = ris_bs_channel(RisBsChannelParams(gains, same, same, same, 4), g)
    single = ris_bs_channel(RisBsChannelParams(np.array([gains.sum()]), same[:1], same[:1],
                                               same[:1], 4), g)
    assert np.linalg.matrix_rank(G) == 1
    np.testing.assert_allclose(G, single / np.sqrt(3), atol=1e-12)


def test_ris_bs_mean_power(rng):
    g = PlanarArrayGeometry(4, 4)
    m = 8
    power = np.mean([np.linalg.norm(sample_ris_bs_channel(g, m, 5, rng)) ** 2
                     for _ in range(10_000)])
    expected = m * 16 * (1 + 4 * 10 ** -0.5) / 5
    assert abs(power / expected - 1) < 0.02


def test_ris_bs_params_ranges(rng):
    p = draw_ris_bs_params(5, 8, rng)
    assert p.num_paths == 5
    for a in (p.bs_angles, p.ris_azimuths, p.ris_elevations):
        assert np.all((a >= 0) & (a < np.pi))
    with pytest.raises(InvalidArgumentError):
        RisBsChannelParams(np.ones(2), np.ones(3), np.ones(2), np.ones(2), 4)
    with pytest.raises(InvalidArgumentError):
        draw_ris_bs_params(0, 8, rng)
