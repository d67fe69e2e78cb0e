"""Correlated RIS-user channels and the geometric RIS-BS channel.

Every cluster covariance shares the eigenvectors of the beam basis ``V``
(see :func:`ris_ep.array_geometry.beam_matrix`), so a covariance is carried
around as its diagonal in the beam domain plus the indices of the beams
that span the cluster eigenspace.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ._rand import crandn
from .array_geometry import PlanarArrayGeometry, ula_matrix, upa_matrix
from .errors import InfeasibleConfigurationError, InvalidArgumentError

__all__ = [
    "ClusterProfile",
    "CovarianceModel",
    "RisBsChannelParams",
    "ScenarioRealization",
    "axis_bin_masses",
    "beam_power_profile",
    "build_cluster_models",
    "build_covariance",
    "draw_ris_bs_params",
    "resolve_beam_conflicts",
    "ris_bs_channel",
    "sample_covariance",
    "sample_ris_bs_channel",
    "sample_user_channel",
    "sample_user_channels",
    "truncate_eigenspace",
    "truncated_laplacian_pdf",
]

SUPPORT = (0.0, np.pi)


# ---------------------------------------------------------------------------
# Truncated Laplacian power angle spectrum
# ---------------------------------------------------------------------------

def _laplace_mass(lo, hi, mean, scale):
    """Mass of an (untruncated) Laplace(mean, scale) law on [lo, hi].

    Evaluated piecewise with ``expm1`` so that far-tail bins keep their
    (tiny but positive) mass instead of cancelling to zero.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    # part of [lo, hi] above the mean
    a = np.maximum(lo, mean) - mean
    b = np.maximum(hi, mean) - mean
    upper = -0.5 * np.exp(-a / scale) * np.expm1(-(b - a) / scale)
    # part below the mean, mirrored
    c = mean - np.minimum(hi, mean)
    d = mean - np.minimum(lo, mean)
    lower = -0.5 * np.exp(-c / scale) * np.expm1(-(d - c) / scale)
    return upper + lower


def truncated_laplacian_pdf(angle, mean: float, sd: float, support=SUPPORT):
    """Laplacian density with standard deviation ``sd``, renormalised to ``support``.

    Zero outside the support.  Accepts scalar or array ``angle``.
    """
    if not sd > 0:
        raise InvalidArgumentError(f"sd must be positive, got {sd}")
    lo, hi = support
    scale = sd / np.sqrt(2.0)
    angle = np.asarray(angle, dtype=float)
    z = _laplace_mass(lo, hi, mean, scale)
    dens = np.exp(-np.abs(angle - mean) / scale) / (2.0 * scale * z)
    dens = np.where((angle >= lo) & (angle < hi), dens, 0.0)
    return dens if dens.ndim else float(dens)


def _bin_edges(count: int) -> np.ndarray:
    # angle boundaries between neighbouring sampled cosines 1 - 2n/count
    n = np.arange(count)
    return np.arccos(np.clip(1.0 - (2.0 * n + 1.0) / count, -1.0, 1.0))


def axis_bin_masses(count: int, mean: float, sd: float) -> np.ndarray:
    """Probability mass of each sampled-angle bin along one array axis.

    A bin collects the angles whose cosine is nearest (modulo 2, the period of
    the half-wavelength array response) to the bin's sampled cosine.  Bin 0
    therefore owns both ends of ``[0, pi)``.
    """
    if not sd > 0:
        raise InvalidArgumentError(f"sd must be positive, got {sd}")
    scale = sd / np.sqrt(2.0)
    edges = _bin_edges(count)
    lo = np.concatenate(([SUPPORT[0]], edges[:-1]))
    hi = edges.copy()
    mass = _laplace_mass(lo, hi, mean, scale)
    mass[0] += _laplace_mass(edges[-1], SUPPORT[1], mean, scale)
    return mass / _laplace_mass(SUPPORT[0], SUPPORT[1], mean, scale)


# ---------------------------------------------------------------------------
# Cluster covariances
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClusterProfile:
    """Separable truncated-Laplacian PAS of one user cluster (radians)."""

    mean_azimuth: float
    mean_elevation: float
    asd_azimuth: float
    asd_elevation: float
    num_users: int = 1

    def __post_init__(self):
        for name in ("mean_azimuth", "mean_elevation"):
            v = getattr(self, name)
            if not (SUPPORT[0] <= v < SUPPORT[1]):
                raise InvalidArgumentError(f"{name} must lie in [0, pi), got {v}")
        if not (self.asd_azimuth > 0 and self.asd_elevation > 0):
            raise InvalidArgumentError("angular standard deviations must be positive")
        if self.num_users < 1:
            raise InvalidArgumentError("a cluster needs at least one user")


def beam_power_profile(profile: ClusterProfile, geometry: PlanarArrayGeometry,
                       trace_norm: float | None = None) -> np.ndarray:
    """Beam-domain eigenvalues of a cluster covariance.

    Entry ``n`` is ``trace_norm`` times the PAS mass falling into the angular
    bin of beam ``n``; ``trace_norm`` defaults to N.
    """
    if trace_norm is None:
        trace_norm = float(geometry.n_elements)
    if not trace_norm > 0:
        raise InvalidArgumentError("trace_norm must be positive")
    p_h = axis_bin_masses(geometry.n_h, profile.mean_azimuth, profile.asd_azimuth)
    p_v = axis_bin_masses(geometry.n_v, profile.mean_elevation, profile.asd_elevation)
    lam = np.kron(p_v, p_h)
    return trace_norm * lam / lam.sum()


def build_covariance(eigenvalues, V: np.ndarray) -> np.ndarray:
    """``V diag(eigenvalues) V^H``."""
    lam = np.asarray(eigenvalues, dtype=float)
    if np.any(lam < 0):
        raise InvalidArgumentError("eigenvalues must be nonnegative")
    if lam.shape != (V.shape[1],):
        raise InvalidArgumentError(
            f"expected {V.shape[1]} eigenvalues, got shape {lam.shape}"
        )
    R = (V * lam) @ V.conj().T
    return 0.5 * (R + R.conj().T)


def truncate_eigenspace(eigenvalues, dimension: int | None = None,
                        energy_fraction: float | None = None) -> np.ndarray:
    """Indices of the dominant beams, in descending-eigenvalue order.

    Exactly one of ``dimension`` (keep that many beams) or
    ``energy_fraction`` (keep the shortest prefix carrying that share of the
    total power) must be given.  Ties go to the lower index.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    n = lam.size
    if (dimension is None) == (energy_fraction is None):
        raise InvalidArgumentError("give exactly one of dimension or energy_fraction")
    order = np.argsort(-lam, kind="stable")
    if dimension is not None:
        if not 1 <= dimension <= n:
            raise InvalidArgumentError(f"dimension must be in [1, {n}], got {dimension}")
        return order[:dimension]
    if not 0 < energy_fraction <= 1:
        raise InvalidArgumentError("energy_fraction must lie in (0, 1]")
    cum = np.cumsum(lam[order])
    target = energy_fraction * lam.sum() * (1.0 - 1e-12)
    k = int(np.searchsorted(cum, target, side="left")) + 1
    return order[:min(k, n)]


def resolve_beam_conflicts(cluster_eigs: Sequence[tuple[np.ndarray, Sequence[int]]]
                           ) -> list[np.ndarray]:
    """Make per-cluster kept-beam sets pairwise disjoint.

    A beam held by several clusters goes to the one with the largest
    eigenvalue on it (ties to the lower cluster index).  Clusters that lose
    beams refill from their best beams not held by anyone; simultaneous
    refill requests for the same beam are settled by the same rule.  Output
    sets are sorted by descending own eigenvalue.
    """
    eigs = [np.asarray(e, dtype=float) for e, _ in cluster_eigs]
    kept = [[int(b) for b in k] for _, k in cluster_eigs]
    if not eigs:
        return []
    n = eigs[0].size
    if any(e.size != n for e in eigs):
        raise InvalidArgumentError("all clusters must share the beam dimension")
    for k in kept:
        if len(set(k)) != len(k) or any(not 0 <= b < n for b in k):
            raise InvalidArgumentError("kept sets must hold distinct indices in range")
    targets = [len(k) for k in kept]
    if sum(targets) > n:
        raise InfeasibleConfigurationError(
            f"total eigenspace dimension {sum(targets)} exceeds N = {n}"
        )

    def better(c1: int, c2: int, beam: int) -> bool:
        e1, e2 = eigs[c1][beam], eigs[c2][beam]
        return e1 > e2 or (e1 == e2 and c1 < c2)

    holders: dict[int, list[int]] = {}
    for c, k in enumerate(kept):
        for b in k:
            holders.setdefault(b, []).append(c)
    owned: list[list[int]] = [[] for _ in kept]
    held = set()
    for b in sorted(holders):
        win = holders[b][0]
        for c in holders[b][1:]:
            if better(c, win, b):
                win = c
        owned[win].append(b)
        held.add(b)

    orders = [np.argsort(-e, kind="stable") for e in eigs]
    cursor = [0] * len(eigs)
    while True:
        proposals: dict[int, list[int]] = {}
        for c in range(len(eigs)):
            if len(owned[c]) >= targets[c]:
                continue
            while orders[c][cursor[c]] in held:
                cursor[c] += 1
            proposals.setdefault(int(orders[c][cursor[c]]), []).append(c)
        if not proposals:
            break
        for b, cs in proposals.items():
            win = cs[0]
            for c in cs[1:]:
                if better(c, win, b):
                    win = c
            owned[win].append(b)
            held.add(b)

    out = []
    for c, beams in enumerate(owned):
        beams = np.sort(np.asarray(beams, dtype=int))
        out.append(beams[np.argsort(-eigs[c][beams], kind="stable")])
    return out


@dataclass(frozen=True)
class CovarianceModel:
    """Beam-domain description of one cluster covariance ``V diag(eigenvalues) V^H``.

    ``kept_beams`` lists the eigenspace beams in descending-eigenvalue order;
    ``ceded`` lists beams the cluster would have kept but lost to another
    cluster during conflict resolution.
    """

    eigenvalues: np.ndarray
    kept_beams: np.ndarray
    cluster_id: int = 0
    trace_norm: float = 1.0
    ceded: tuple = field(default=())

    @property
    def dimension(self) -> int:
        return int(self.kept_beams.size)

    @property
    def n_beams(self) -> int:
        return int(self.eigenvalues.size)

    def restricted_eigenvalues(self) -> np.ndarray:
        """Eigenvalues with everything outside the kept beams zeroed."""
        lam = np.zeros_like(self.eigenvalues)
        lam[self.kept_beams] = self.eigenvalues[self.kept_beams]
        return lam

    def matrix(self, V: np.ndarray, full_spectrum: bool = True) -> np.ndarray:
        lam = self.eigenvalues if full_spectrum else self.restricted_eigenvalues()
        return build_covariance(lam, V)

    def dropped_fraction(self) -> float:
        """Share of the cluster power lying outside the kept beams."""
        total = self.eigenvalues.sum()
        return float((total - self.eigenvalues[self.kept_beams].sum()) / total)


def build_cluster_models(profiles: Sequence[ClusterProfile], geometry: PlanarArrayGeometry,
                         dimensions: Sequence[int] | int | None = None,
                         energy_fraction: float | None = None,
                         trace_norm: float | None = None) -> list[CovarianceModel]:
    """Eigenvalues, truncation and conflict resolution for a set of clusters.

    ``dimensions`` is either one E_c per cluster or a single value shared by
    all clusters.
    """
    if trace_norm is None:
        trace_norm = float(geometry.n_elements)
    if isinstance(dimensions, (int, np.integer)):
        dimensions = [int(dimensions)] * len(profiles)
    if dimensions is not None and len(dimensions) != len(profiles):
        raise InvalidArgumentError("need one eigenspace dimension per cluster")
    n = geometry.n_elements
    if dimensions is not None and sum(dimensions) > n:
        raise InfeasibleConfigurationError(
            f"total eigenspace dimension {sum(dimensions)} exceeds N = {n}"
        )
    eigs = [beam_power_profile(p, geometry, trace_norm) for p in profiles]
    initial = [
        truncate_eigenspace(lam, dimension=None if dimensions is None else dimensions[c],
                            energy_fraction=energy_fraction)
        for c, lam in enumerate(eigs)
    ]
    resolved = resolve_beam_conflicts(list(zip(eigs, initial)))
    models = []
    for c, (lam, first, final) in enumerate(zip(eigs, initial, resolved)):
        ceded = tuple(int(b) for b in first if b not in set(final.tolist()))
        models.append(CovarianceModel(lam, final, cluster_id=c, trace_norm=trace_norm,
                                      ceded=ceded))
    return models


def sample_user_channels(cov: CovarianceModel, V: np.ndarray, rng: np.random.Generator,
                         count: int, full_spectrum: bool = True) -> np.ndarray:
    """``count`` i.i.d. draws of ``V diag(sqrt(lambda)) z``, shape (count, N)."""
    if full_spectrum:
        idx = np.arange(cov.n_beams)
    else:
        idx = np.sort(cov.kept_beams)
    z = crandn(rng, (count, idx.size))
    return (z * np.sqrt(cov.eigenvalues[idx])) @ V[:, idx].T


def sample_user_channel(cov: CovarianceModel, V: np.ndarray, rng: np.random.Generator,
                        full_spectrum: bool = True) -> np.ndarray:
    """One correlated Rayleigh RIS-user channel, length N.

    With ``full_spectrum=False`` only the kept beams are excited, so the
    draw lies exactly in the cluster eigenspace.
    """
    return sample_user_channels(cov, V, rng, 1, full_spectrum)[0]


def sample_covariance(observations) -> np.ndarray:
    """Sample correlation ``(1/count) sum h h^H`` of row-stacked observations."""
    X = np.asarray(observations)
    if X.size == 0:
        raise InvalidArgumentError("need at least one observation")
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise InvalidArgumentError("observations must be a sequence of equal-length vectors")
    return (X.T @ X.conj()) / X.shape[0]


# ---------------------------------------------------------------------------
# RIS-BS channel
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RisBsChannelParams:
    gains: np.ndarray
    bs_angles: np.ndarray
    ris_azimuths: np.ndarray
    ris_elevations: np.ndarray
    m_antennas: int

    def __post_init__(self):
        lengths = {np.size(self.gains), np.size(self.bs_angles),
                   np.size(self.ris_azimuths), np.size(self.ris_elevations)}
        if len(lengths) != 1:
            raise InvalidArgumentError("all path parameter sequences must share length L")
        if self.m_antennas < 1:
            raise InvalidArgumentError("m_antennas must be positive")

    @property
    def num_paths(self) -> int:
        return int(np.size(self.gains))


def draw_ris_bs_params(num_paths: int, m_antennas: int, rng: np.random.Generator,
                       los_variance: float = 1.0,
                       nlos_variance: float = 10 ** -0.5) -> RisBsChannelParams:
    """Random path set: path 0 is the LoS path, angles uniform on [0, pi)."""
    if num_paths < 1:
        raise InvalidArgumentError("need at least one path")
    var = np.full(num_paths, nlos_variance, dtype=float)
    var[0] = los_variance
    gains = crandn(rng, num_paths) * np.sqrt(var)
    angles = rng.uniform(0.0, np.pi, size=(3, num_paths))
    return RisBsChannelParams(gains, angles[0], angles[1], angles[2], m_antennas)


def ris_bs_channel(params: RisBsChannelParams, geometry: PlanarArrayGeometry) -> np.ndarray:
    """``sqrt(MN/L) sum_l rho_l e_M(gamma_l) e_RIS(phi_l, theta_l)^H``, shape (M, N)."""
    m, n, L = params.m_antennas, geometry.n_elements, params.num_paths
    a_bs = ula_matrix(m, params.bs_angles)
    a_ris = upa_matrix(geometry, params.ris_azimuths, params.ris_elevations)
    return np.sqrt(m * n / L) * (a_bs * np.asarray(params.gains)) @ a_ris.conj().T


def sample_ris_bs_channel(geometry: PlanarArrayGeometry, m_antennas: int, num_paths: int,
                          rng: np.random.Generator, **gain_law) -> np.ndarray:
    return ris_bs_channel(draw_ris_bs_params(num_paths, m_antennas, rng, **gain_law), geometry)


@dataclass
class ScenarioRealization:
    """One Monte-Carlo draw of all channels, unit-scale (path loss kept separate)."""

    ris_bs: np.ndarray
    user_channels: Mapping[tuple[int, int], np.ndarray]
    pathloss_ris_bs: float = 1.0
    pathloss_ris_user: float = 1.0

    def physical_ris_bs(self) -> np.ndarray:
        return np.sqrt(self.pathloss_ris_bs) * self.ris_bs

    def physical_user_channels(self) -> dict[tuple[int, int], np.ndarray]:
        g = np.sqrt(self.pathloss_ris_user)
        return {k: g * h for k, h in self.user_channels.items()}
