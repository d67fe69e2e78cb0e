"""LS cascaded-channel baseline and pilot-overhead accounting."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import numpy as np

from .errors import DegenerateDesignError, InvalidArgumentError
from .pilot_protocol import PilotBook, ReceivedFrame, matched_filter_all

__all__ = [
    "LsDesign",
    "LsSolver",
    "OverheadParams",
    "fourier_design",
    "ls_estimate",
    "overhead_table",
]


# ---------------------------------------------------------------------------
# LS estimation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LsDesign:
    """N reflection patterns (rows) used over N training subframes."""

    patterns: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.patterns)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise InvalidArgumentError("LS design needs an N x N pattern matrix")
        if np.linalg.cond(p) >= 1e6:
            raise DegenerateDesignError("reflection patterns are (nearly) linearly dependent")

    @property
    def num_subframes(self) -> int:
        return self.patterns.shape[0]


def fourier_design(n: int) -> LsDesign:
    """Unit-modulus DFT patterns: subframe t uses ``exp(-j 2 pi t n / N)``."""
    k = np.arange(n)
    return LsDesign(np.exp(-2j * np.pi * np.outer(k, k) / n))


class LsSolver:
    """Least-squares solver for a fixed ``(G, design)`` pair.

    Block row ``t`` of the stacked system is ``G diag(phi_t)``, so the normal
    matrix is ``(G^H G) * (Phi^H Phi)`` (element-wise) and is formed once.
    """

    def __init__(self, G: np.ndarray, design: LsDesign):
        self.G = np.asarray(G)
        self.design = design
        phi = design.patterns
        if phi.shape[1] != self.G.shape[1]:
            raise InvalidArgumentError("design and G disagree on the number of REs")
        gram = (self.G.conj().T @ self.G) * (phi.conj().T @ phi)
        gram = 0.5 * (gram + gram.conj().T)
        w = np.linalg.eigvalsh(gram)
        if w[0] <= w[-1] * 1e-12:
            raise DegenerateDesignError("stacked LS system is rank deficient")
        self._gram = gram

    def solve(self, observations: np.ndarray) -> np.ndarray:
        """Solve for each column of ``observations`` (shape (T, M, k)) -> (N, k)."""
        phi = self.design.patterns
        # A^H y = sum_t conj(phi_t) * (G^H y_t)
        back = np.einsum("mn,tmk->tnk", self.G.conj(), observations)
        rhs = np.einsum("tn,tnk->nk", phi.conj(), back)
        return np.linalg.solve(self._gram, rhs)


def ls_estimate(received: ReceivedFrame, pilot_index: int, G: np.ndarray,
                design: LsDesign, pilot_book: PilotBook) -> np.ndarray:
    """LS estimate of the RIS-user channel of the user on ``pilot_index``.

    Requires one subframe per RE and a pilot not shared with any other user.
    """
    if received.num_subframes != design.num_subframes:
        raise InvalidArgumentError(
            f"frame has {received.num_subframes} subframes, design needs {design.num_subframes}"
        )
    if not 0 <= pilot_index < pilot_book.tau:
        raise InvalidArgumentError(f"pilot index {pilot_index} out of range")
    obs = matched_filter_all(received, pilot_book)[:, :, [pilot_index]]
    return LsSolver(G, design).solve(obs)[:, 0]


# ---------------------------------------------------------------------------
# Pilot overhead
# ---------------------------------------------------------------------------

def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def _exact(x) -> Fraction:
    return x if isinstance(x, Rational) else Fraction(x)


@dataclass(frozen=True)
class OverheadParams:
    m_antennas: int
    n_elements: int
    k_users: int
    c_clusters: int
    e_dim: int
    alpha: float = 16
    beta: int = 4

    def __post_init__(self):
        ints = (self.m_antennas, self.n_elements, self.k_users, self.c_clusters,
                self.e_dim, self.beta)
        if any(int(v) != v or v < 1 for v in ints):
            raise InvalidArgumentError("M, N, K, C, E and beta must be positive integers")
        if self.alpha < 1:
            raise InvalidArgumentError("alpha must be >= 1")
        if self.e_dim > self.n_elements:
            raise InvalidArgumentError("E cannot exceed N")
        if self.c_clusters > self.k_users:
            raise InvalidArgumentError("C cannot exceed K")


def overhead_table(params: OverheadParams) -> dict[str, Fraction]:
    """Pilot overhead per small-timescale frame for the four schemes, exact.

    Keys: ``ls``, ``three_phase``, ``two_timescale``, ``proposed``.
    """
    M, N, K = params.m_antennas, params.n_elements, params.k_users
    C, E, beta = params.c_clusters, params.e_dim, params.beta
    alpha = _exact(params.alpha)
    per_user = _ceil_div(N, M)
    return {
        "ls": Fraction(N * K),
        "three_phase": Fraction(N + max(K - 1, _ceil_div((K - 1) * N, M))),
        "two_timescale": Fraction(2 * (N - 1)) / alpha + K * per_user,
        "proposed": (Fraction(2 * (N - 1)) + beta * K * per_user) / alpha + Fraction(K * E, C),
    }
