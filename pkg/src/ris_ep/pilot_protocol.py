"""Orthogonal pilots, cluster pilot reuse and uplink frame synthesis.

A frame has ``T`` subframes of ``tau`` slots.  The i-th user of every
cluster sends pilot ``i``, so after matched filtering against pilot ``i``
the BS sees the superposition of those users' channels only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ._rand import crandn
from .errors import InvalidArgumentError

__all__ = [
    "FramePlan",
    "PilotBook",
    "ReceivedFrame",
    "make_frame_plan",
    "make_pilot_book",
    "matched_filter",
    "matched_filter_all",
    "pilot_sum_channels",
    "transmit_frame",
]


@dataclass(frozen=True)
class PilotBook:
    """``tau`` orthogonal pilots of length ``tau``; column ``p`` is pilot ``p``."""

    tau: int
    power: float
    sequences: np.ndarray

    def pilot(self, index: int) -> np.ndarray:
        return self.sequences[:, index]


def make_pilot_book(tau: int, power: float = 1.0) -> PilotBook:
    """Scaled DFT columns: entry ``(k, p) = sqrt(power) exp(j 2 pi k p / tau)``."""
    if tau < 1:
        raise InvalidArgumentError(f"tau must be >= 1, got {tau}")
    if not power > 0:
        raise InvalidArgumentError(f"power must be positive, got {power}")
    k = np.arange(tau)
    seq = np.sqrt(power) * np.exp(2j * np.pi * np.outer(k, k) / tau)
    return PilotBook(tau=int(tau), power=float(power), sequences=seq)


@dataclass(frozen=True)
class FramePlan:
    """Pilot assignment ``(cluster, user) -> pilot`` and number of subframes."""

    num_subframes: int
    assignment: Mapping[tuple[int, int], int]

    @property
    def tau(self) -> int:
        return max(self.assignment.values()) + 1 if self.assignment else 0

    @property
    def users(self) -> list[tuple[int, int]]:
        return sorted(self.assignment)

    def users_on(self, pilot: int) -> list[tuple[int, int]]:
        return [u for u in self.users if self.assignment[u] == pilot]


def make_frame_plan(users_per_cluster: Sequence[int], num_subframes: int,
                    reuse: bool = True) -> FramePlan:
    """Pilot plan for clusters of the given sizes.

    With ``reuse`` the i-th user of each cluster gets pilot ``i`` and
    ``tau = max(users_per_cluster)``.  Without it every user gets its own pilot
    (``tau = K``), the layout the LS baseline needs.
    """
    if num_subframes < 1:
        raise InvalidArgumentError("need at least one subframe")
    if any(i < 1 for i in users_per_cluster):
        raise InvalidArgumentError("every cluster needs at least one user")
    assignment = {}
    k = 0
    for c, count in enumerate(users_per_cluster):
        for i in range(count):
            assignment[(c, i)] = i if reuse else k
            k += 1
    return FramePlan(num_subframes=int(num_subframes), assignment=assignment)


@dataclass(frozen=True)
class ReceivedFrame:
    """Received pilot matrices ``Y_t`` stacked as shape (T, M, tau)."""

    frames: np.ndarray
    noise_power: float

    @property
    def num_subframes(self) -> int:
        return self.frames.shape[0]


def pilot_sum_channels(channels: Mapping[tuple[int, int], np.ndarray], plan: FramePlan,
                       tau: int, n: int) -> np.ndarray:
    """Per-pilot sum channels stacked as columns, shape (N, tau)."""
    S = np.zeros((n, tau), dtype=complex)
    for user, pilot in plan.assignment.items():
        if user not in channels:
            raise InvalidArgumentError(f"no channel given for user {user}")
        h = np.asarray(channels[user])
        if h.shape != (n,):
            raise InvalidArgumentError(f"channel of user {user} has shape {h.shape}, expected ({n},)")
        S[:, pilot] += h
    return S


def transmit_frame(G: np.ndarray, reflection_schedule, channels, plan: FramePlan,
                   pilot_book: PilotBook, noise_power: float,
                   rng: np.random.Generator | None = None) -> ReceivedFrame:
    """Synthesize ``Y_t = sum_users G Phi_t h x_pilot^T + N_t`` for every subframe.

    ``reflection_schedule`` is an array of shape (T, N) holding the diagonals
    of ``Phi_t``.  Noise entries are CN(0, noise_power), drawn fresh for every
    subframe and slot; ``rng`` may be omitted only when ``noise_power`` is 0.
    """
    G = np.asarray(G)
    phi = np.asarray(reflection_schedule)
    if G.ndim != 2 or phi.ndim != 2:
        raise InvalidArgumentError("G must be (M, N) and the schedule (T, N)")
    m, n = G.shape
    if phi.shape[1] != n:
        raise InvalidArgumentError(f"schedule has {phi.shape[1]} REs, G has {n}")
    if phi.shape[0] != plan.num_subframes:
        raise InvalidArgumentError(
            f"schedule has {phi.shape[0]} subframes, plan expects {plan.num_subframes}"
        )
    if plan.tau > pilot_book.tau:
        raise InvalidArgumentError("plan uses more pilots than the pilot book holds")
    if noise_power < 0:
        raise InvalidArgumentError("noise_power must be nonnegative")
    tau = pilot_book.tau
    S = pilot_sum_channels(channels, plan, tau, n)
    # Y_t = G diag(phi_t) S X^T
    Y = np.einsum("mn,tn,np->tmp", G, phi, S @ pilot_book.sequences.T, optimize=True)
    if noise_power > 0:
        if rng is None:
            raise InvalidArgumentError("a random generator is required when noise_power > 0")
        Y = Y + crandn(rng, Y.shape, noise_power)
    return ReceivedFrame(frames=Y, noise_power=float(noise_power))


def matched_filter(Y_t: np.ndarray, pilot_index: int, pilot_book: PilotBook) -> np.ndarray:
    """``(1/(tau P)) Y_t x_p^*``: the observation ``G Phi_t h_p^sum + noise``."""
    if not 0 <= pilot_index < pilot_book.tau:
        raise InvalidArgumentError(f"pilot index {pilot_index} out of range")
    x = pilot_book.pilot(pilot_index)
    return (np.asarray(Y_t) @ x.conj()) / (pilot_book.tau * pilot_book.power)


def matched_filter_all(received: ReceivedFrame, pilot_book: PilotBook) -> np.ndarray:
    """Matched-filter every subframe against every pilot, shape (T, M, tau)."""
    return (received.frames @ pilot_book.sequences.conj()) / (pilot_book.tau * pilot_book.power)
