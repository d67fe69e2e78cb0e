"""Eigenspace-projection (EP) estimation of RIS-user channels.

Per pilot index the BS observes the sum channel of all users sharing that
pilot.  Subframe ``t`` configures the RIS so that the SVD-combined
observation is a scaled copy of the projection of that sum channel onto the
``t``-th eigenspace beam; each projection is MMSE-estimated from the
statistical CSI and the estimate is split by beam ownership.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel_model import CovarianceModel
from .errors import (DegenerateInputError, DegenerateScheduleError,
                     InvalidArgumentError)
from .pilot_protocol import FramePlan, PilotBook, ReceivedFrame, matched_filter_all

__all__ = [
    "CombinerConfig",
    "EstimationResult",
    "ReflectionSchedule",
    "SumEigenspace",
    "build_reflection_schedule",
    "build_sum_eigenspace",
    "combine",
    "compute_combiner",
    "estimate_all",
    "mmse_gain",
    "mmse_project",
    "reconstruct_and_split",
]


@dataclass(frozen=True)
class SumEigenspace:
    """Basis beams of the sum-channel eigenspace.

    ``beams[t]`` is the column of ``V`` probed in subframe ``t``;
    ``eigenvalues[t]`` its variance and ``owner[t]`` the cluster it belongs to.
    """

    beams: np.ndarray
    eigenvalues: np.ndarray
    owner: np.ndarray

    @property
    def dimension(self) -> int:
        return int(self.beams.size)

    def scaled(self, factor: float) -> "SumEigenspace":
        """Same basis with eigenvalues multiplied by a path-loss gain."""
        return SumEigenspace(self.beams, self.eigenvalues * factor, self.owner)

    def basis(self, V: np.ndarray) -> np.ndarray:
        """Basis vectors as columns, shape (N, E)."""
        return V[:, self.beams]


def build_sum_eigenspace(cluster_covs: Sequence[CovarianceModel]) -> SumEigenspace:
    """Concatenate cluster eigenspaces (cluster-major, descending within a cluster)."""
    beams, lams, owner = [], [], []
    for cov in cluster_covs:
        beams.append(np.asarray(cov.kept_beams, dtype=int))
        lams.append(cov.eigenvalues[cov.kept_beams])
        owner.append(np.full(cov.dimension, cov.cluster_id, dtype=int))
    if not beams:
        raise InvalidArgumentError("need at least one cluster")
    beams = np.concatenate(beams)
    if np.unique(beams).size != beams.size:
        raise InvalidArgumentError(
            "cluster eigenspaces overlap; resolve beam conflicts first"
        )
    lams = np.concatenate(lams)
    if np.any(lams <= 0):
        raise InvalidArgumentError("every eigenspace beam needs a positive eigenvalue")
    return SumEigenspace(beams=beams, eigenvalues=lams, owner=np.concatenate(owner))


@dataclass(frozen=True)
class CombinerConfig:
    """Principal singular triple of G: ``w^H G = delta v^H``."""

    w: np.ndarray
    delta: float
    v: np.ndarray


def compute_combiner(G: np.ndarray) -> CombinerConfig:
    G = np.asarray(G)
    if not np.any(G):
        raise DegenerateInputError("RIS-BS channel is all zeros")
    U, s, Vh = np.linalg.svd(G, full_matrices=False)
    return CombinerConfig(w=U[:, 0], delta=float(s[0]), v=Vh[0].conj())


@dataclass(frozen=True)
class ReflectionSchedule:
    """Per-subframe RE amplitudes/phases and the scale factors ``kappa_t``.

    Amplitudes are stored separately from phases so the peak amplitude of
    each subframe is exactly 1.
    """

    amplitudes: np.ndarray
    phases: np.ndarray
    kappas: np.ndarray
    mask: np.ndarray

    @property
    def coefficients(self) -> np.ndarray:
        """Diagonals of ``Phi_t``, shape (T, N)."""
        return self.amplitudes * np.exp(1j * self.phases)

    @property
    def num_subframes(self) -> int:
        return self.amplitudes.shape[0]


def build_reflection_schedule(basis: SumEigenspace, V: np.ndarray, v: np.ndarray,
                              epsilon_v: float = 1e-9) -> ReflectionSchedule:
    """RIS patterns with ``Phi_t^H v = kappa_t d_t`` on the unmasked REs.

    REs with ``|v_n| <= epsilon_v * max|v|`` are switched off.  The scale
    factor is the largest feasible one, ``1 / max_n |d_tn / v_n|``.
    """
    if epsilon_v < 0:
        raise InvalidArgumentError("epsilon_v must be nonnegative")
    v = np.asarray(v)
    mag = np.abs(v)
    active = mag > epsilon_v * mag.max()
    D = basis.basis(V).T  # (T, N), row t is d_t
    ratio = np.zeros(D.shape, dtype=complex)
    ratio[:, active] = D[:, active] / v[active]
    rmag = np.abs(ratio)
    peak = rmag.max(axis=1)
    if np.any(peak == 0):
        t = int(np.flatnonzero(peak == 0)[0])
        raise DegenerateScheduleError(
            f"basis beam {int(basis.beams[t])} lies entirely on masked REs"
        )
    amplitudes = rmag / peak[:, None]
    phases = np.where(rmag > 0, -np.angle(ratio), 0.0)
    return ReflectionSchedule(amplitudes=amplitudes, phases=phases, kappas=1.0 / peak,
                              mask=~active)


def combine(observation: np.ndarray, w: np.ndarray):
    """``w^H y``."""
    observation = np.asarray(observation)
    w = np.asarray(w)
    if observation.shape[-1] != w.shape[0]:
        raise InvalidArgumentError("observation and combiner lengths differ")
    return observation @ w.conj()


def mmse_gain(lambda_t, delta, kappa_t, tau, power, noise_power):
    """Scalar MMSE gain for ``r = delta kappa eta + z``, ``z ~ CN(0, sigma^2/(tau P))``."""
    lambda_t = np.asarray(lambda_t, dtype=float)
    kappa_t = np.asarray(kappa_t, dtype=float)
    num = power * tau * delta * kappa_t * lambda_t
    den = power * tau * delta ** 2 * kappa_t ** 2 * lambda_t + noise_power
    with np.errstate(invalid="ignore", divide="ignore"):
        gain = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    return gain if gain.ndim else float(gain)


def mmse_project(r, lambda_t: float, delta: float, kappa_t: float, tau: int,
                 power: float, noise_power: float):
    """MMSE estimate of the projection coefficient from its combined observation."""
    return mmse_gain(lambda_t, delta, kappa_t, tau, power, noise_power) * r


@dataclass
class EstimationResult:
    """Channel estimates keyed by ``(cluster, pilot)``.

    ``coefficients[p, t]`` is the estimated projection of pilot ``p``'s sum
    channel on basis beam ``t``; ``sum_channels[p]`` the reconstructed sum.
    """

    channels: dict[tuple[int, int], np.ndarray]
    coefficients: np.ndarray
    sum_channels: np.ndarray


def reconstruct_and_split(coefficients: np.ndarray, basis: SumEigenspace,
                          V: np.ndarray) -> EstimationResult:
    """Rebuild sum channels and split them by beam ownership.

    ``coefficients`` has shape (tau, E); channels are returned for every
    ``(cluster, pilot)`` pair.
    """
    coefficients = np.atleast_2d(np.asarray(coefficients, dtype=complex))
    if coefficients.shape[1] != basis.dimension:
        raise InvalidArgumentError(
            f"expected {basis.dimension} coefficients per pilot, got {coefficients.shape[1]}"
        )
    D = basis.basis(V)
    # the sum is accumulated from the cluster parts in cluster order, so the
    # split is an exact regrouping of the reconstruction
    sums = np.zeros((coefficients.shape[0], D.shape[0]), dtype=complex)
    channels = {}
    for c in np.unique(basis.owner):
        sel = basis.owner == c
        part = coefficients[:, sel] @ D[:, sel].T
        sums = sums + part
        for p in range(coefficients.shape[0]):
            channels[(int(c), p)] = part[p]
    return EstimationResult(channels=channels, coefficients=coefficients, sum_channels=sums)


def estimate_all(received: ReceivedFrame, plan: FramePlan, pilot_book: PilotBook,
                 combiner: CombinerConfig, schedule: ReflectionSchedule,
                 basis: SumEigenspace, V: np.ndarray) -> EstimationResult:
    """Run the per-subframe, per-pilot EP pipeline over a received frame.

    Returned channels are keyed by ``(cluster, user)`` as in the plan.
    """
    T = received.num_subframes
    if T != basis.dimension or schedule.num_subframes != T:
        raise InvalidArgumentError(
            f"frame has {T} subframes, eigenspace has {basis.dimension}, "
            f"schedule has {schedule.num_subframes}"
        )
    obs = matched_filter_all(received, pilot_book)           # (T, M, tau)
    r = np.einsum("m,tmp->pt", combiner.w.conj(), obs)      # (tau, T)
    gain = mmse_gain(basis.eigenvalues, combiner.delta, schedule.kappas, pilot_book.tau,
                     pilot_book.power, received.noise_power)
    eta = r * gain[None, :]
    split = reconstruct_and_split(eta, basis, V)
    channels = {(c, i): split.channels[(c, plan.assignment[(c, i)])] for c, i in plan.users}
    return EstimationResult(channels=channels, coefficients=eta, sum_channels=split.sum_channels)
