"""Monte-Carlo NMSE experiments for the EP scheme and the LS baseline.

Randomness is counter-based: every random quantity is drawn from a
``numpy`` ``SeedSequence`` whose spawn key names what it is for, so results
do not depend on evaluation order or on how trials are spread over worker
threads.

=============  ==========================================
spawn key      stream
=============  ==========================================
(0, b)         RIS-BS channel of large-timescale block b
(1, i)         RIS-user channels of trial i
(2, s, i, k)   receiver noise of trial i at SNR index s for scheme k
=============  ==========================================

Channels are common to every SNR point and scheme (common random numbers),
so differences along an SNR sweep or between schemes reflect the noise
level and the estimator rather than a fresh channel sample.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .array_geometry import PlanarArrayGeometry, beam_matrix
from .baselines import LsSolver, OverheadParams, fourier_design, overhead_table
from .channel_model import (CovarianceModel, build_cluster_models, draw_ris_bs_params,
                            ris_bs_channel, sample_user_channels)
from .config import SCHEMES, ExperimentConfig
from .ep_estimator import (build_reflection_schedule, build_sum_eigenspace,
                           compute_combiner, estimate_all)
from .errors import ConfigurationError, ExportError, InvalidArgumentError
from .pilot_protocol import make_frame_plan, make_pilot_book, matched_filter_all, transmit_frame

__all__ = [
    "CSV_COLUMNS",
    "MetricRecord",
    "Simulation",
    "cascaded_nmse",
    "cascaded_nmse_per_user",
    "direct_nmse",
    "direct_nmse_per_user",
    "export_records",
    "pathloss_gain",
    "read_records",
    "run_experiment",
    "snr_to_noise",
]

log = logging.getLogger(__name__)

CSV_COLUMNS = ("scheme", "snr_db", "nmse_cascaded", "nmse_direct", "stderr", "trials",
               "pilot_overhead")


# ---------------------------------------------------------------------------
# SNR and metrics
# ---------------------------------------------------------------------------

def pathloss_gain(ref_db: float, ref_distance: float, distance: float, exponent: float) -> float:
    """Linear gain ``10^(ref_db/10) * (distance/ref_distance)^-exponent``."""
    if distance <= 0 or ref_distance <= 0:
        raise InvalidArgumentError("distances must be positive")
    return 10.0 ** (ref_db / 10.0) * (distance / ref_distance) ** (-exponent)


def snr_to_noise(power: float, pathloss_g: float, pathloss_h: float, snr_db: float) -> float:
    """Noise power giving ``SNR = P rho_g rho_h / sigma^2``."""
    if not (power > 0 and pathloss_g > 0 and pathloss_h > 0):
        raise InvalidArgumentError("power and path-loss gains must be positive")
    return power * pathloss_g * pathloss_h / 10.0 ** (snr_db / 10.0)


def _per_user(estimates, truths, weights):
    out = {}
    skipped = 0
    for user, h in truths.items():
        if user not in estimates:
            raise InvalidArgumentError(f"no estimate for user {user}")
        h = np.asarray(h)
        ref = float(np.sum(weights * np.abs(h) ** 2))
        if ref == 0.0:
            skipped += 1
            continue
        err = float(np.sum(weights * np.abs(h - np.asarray(estimates[user])) ** 2))
        out[user] = err / ref
    if skipped:
        warnings.warn(f"{skipped} user(s) with an all-zero channel excluded from the NMSE",
                      RuntimeWarning, stacklevel=3)
    return out


def cascaded_nmse_per_user(estimates: Mapping, truths: Mapping, G: np.ndarray) -> dict:
    """``||G diag(h - h_hat)||_F^2 / ||G diag(h)||_F^2`` for every user."""
    # ||G diag(x)||_F^2 = sum_n ||g_n||^2 |x_n|^2
    col = np.sum(np.abs(np.asarray(G)) ** 2, axis=0)
    return _per_user(estimates, truths, col)


def direct_nmse_per_user(estimates: Mapping, truths: Mapping) -> dict:
    """``||h - h_hat||^2 / ||h||^2`` for every user."""
    return _per_user(estimates, truths, 1.0)


def _mean(values: Iterable[float]) -> float:
    values = list(values)
    return math.fsum(values) / len(values) if values else float("nan")


def cascaded_nmse(estimates: Mapping, truths: Mapping, G: np.ndarray) -> float:
    """User-averaged cascaded-channel NMSE of one realisation."""
    return _mean(cascaded_nmse_per_user(estimates, truths, G).values())


def direct_nmse(estimates: Mapping, truths: Mapping) -> float:
    """User-averaged RIS-user channel NMSE of one realisation."""
    return _mean(direct_nmse_per_user(estimates, truths).values())


@dataclass(frozen=True)
class MetricRecord:
    scheme: str
    snr_db: float
    nmse_cascaded: float
    nmse_direct: float
    stderr: float
    trials: int
    pilot_overhead: float


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

class Simulation:
    """Precomputed statistics and per-trial kernels for one configuration."""

    def __init__(self, config: ExperimentConfig):
        self.config = cfg = config
        self.geometry = PlanarArrayGeometry(cfg.n_h, cfg.n_v)
        self.V = beam_matrix(self.geometry)
        energy = None if cfg.eigenspace_mode == "fixed" else cfg.energy_fraction
        try:
            self.clusters: list[CovarianceModel] = build_cluster_models(
                cfg.clusters, self.geometry, dimensions=cfg.cluster_dimensions(),
                energy_fraction=energy)
            # the energy mode can still overshoot N after truncation
            total = sum(c.dimension for c in self.clusters)
        except InvalidArgumentError as exc:
            raise ConfigurationError(str(exc)) from exc
        if total > self.geometry.n_elements:
            raise ConfigurationError(f"eigenspace dimension {total} exceeds N")
        self.basis = build_sum_eigenspace(self.clusters)
        self.rho_g = pathloss_gain(cfg.ref_db, cfg.ref_distance, cfg.ris_bs_distance,
                                   cfg.ris_bs_exponent)
        self.rho_h = pathloss_gain(cfg.ref_db, cfg.ref_distance, cfg.ris_user_distance,
                                   cfg.ris_user_exponent)
        sizes = [c.num_users for c in cfg.clusters]
        self.users = [(c, i) for c, n in enumerate(sizes) for i in range(n)]
        self.ep_plan = make_frame_plan(sizes, self.basis.dimension, reuse=True)
        self.ep_book = make_pilot_book(max(sizes), cfg.power)
        self.ep_basis = self.basis.scaled(self.rho_h)
        self.ls_design = fourier_design(self.geometry.n_elements)
        self.ls_plan = make_frame_plan(sizes, self.geometry.n_elements, reuse=False)
        self.ls_book = make_pilot_book(len(self.users), cfg.power)
        self._block = lru_cache(maxsize=8)(self._make_block)
        self._solver = lru_cache(maxsize=2)(self._ls_solver)

    # random streams ------------------------------------------------------
    def _rng(self, *key: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.config.seed, spawn_key=key))

    def noise_power(self, snr_db: float) -> float:
        if self.config.noise_power is not None:
            return self.config.noise_power
        return snr_to_noise(self.config.power, self.rho_g, self.rho_h, snr_db)

    def pilot_overhead(self, scheme: str) -> float:
        cfg = self.config
        table = overhead_table(OverheadParams(
            cfg.m_antennas, self.geometry.n_elements, cfg.k_users, cfg.c_clusters,
            self.basis.dimension, cfg.alpha, cfg.beta))
        return float(table["proposed" if scheme == "ep" else "ls"])

    # per-block quantities --------------------------------------------------
    def _make_block(self, block: int):
        cfg = self.config
        params = draw_ris_bs_params(cfg.num_paths, cfg.m_antennas, self._rng(0, block),
                                    cfg.los_variance, cfg.nlos_variance)
        G = np.sqrt(self.rho_g) * ris_bs_channel(params, self.geometry)
        combiner = compute_combiner(G)
        schedule = build_reflection_schedule(self.ep_basis, self.V, combiner.v, cfg.epsilon_v)
        return G, combiner, schedule

    def _ls_solver(self, block: int) -> LsSolver:
        G = self._block(block)[0]
        return LsSolver(G, self.ls_design)

    def ris_bs(self, trial: int) -> np.ndarray:
        """Physical RIS-BS channel in force during ``trial``."""
        return self._block(trial // self.config.g_cadence)[0]

    def user_channels(self, trial: int) -> dict:
        cfg = self.config
        rng = self._rng(1, trial)
        full = cfg.channel_spectrum == "full"
        out = {}
        for cov, profile in zip(self.clusters, cfg.clusters):
            draws = sample_user_channels(cov, self.V, rng, profile.num_users, full_spectrum=full)
            for i in range(profile.num_users):
                out[(cov.cluster_id, i)] = np.sqrt(self.rho_h) * draws[i]
        return out

    # trial kernels -----------------------------------------------------------
    def run_trial(self, snr_idx: int, trial: int, schemes: Sequence[str] | None = None) -> dict:
        """NMSE values of one trial, ``{scheme: (cascaded, direct, per_user_direct)}``."""
        cfg = self.config
        schemes = cfg.schemes if schemes is None else schemes
        sigma2 = self.noise_power(cfg.snr_db[snr_idx])
        block = trial // cfg.g_cadence
        G, combiner, schedule = self._block(block)
        truths = self.user_channels(trial)
        out = {}
        for scheme in schemes:
            rng = self._rng(2, snr_idx, trial, SCHEMES.index(scheme))
            if scheme == "ep":
                rx = transmit_frame(G, schedule.coefficients, truths, self.ep_plan, self.ep_book,
                                    sigma2, rng)
                est = estimate_all(rx, self.ep_plan, self.ep_book, combiner, schedule,
                                   self.ep_basis, self.V).channels
            else:
                rx = transmit_frame(G, self.ls_design.patterns, truths, self.ls_plan,
                                    self.ls_book, sigma2, rng)
                sol = self._solver(block).solve(matched_filter_all(rx, self.ls_book))
                est = {u: sol[:, self.ls_plan.assignment[u]] for u in self.users}
            per_user = direct_nmse_per_user(est, truths)
            out[scheme] = (cascaded_nmse(est, truths, G), _mean(per_user.values()), per_user)
        return out


def run_experiment(config: ExperimentConfig, workers: int = 1) -> list[MetricRecord]:
    """Run every (scheme, SNR) point of a configuration.

    Output is identical for any ``workers`` count: per-trial values are
    stored by trial index and reduced with ``math.fsum``.
    """
    sim = Simulation(config)
    n_snr, n_trials = len(config.snr_db), config.trials
    cells = [(s, i) for s in range(n_snr) for i in range(n_trials)]

    def work(cell):
        s, i = cell
        return sim.run_trial(s, i)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, cells))
    else:
        results = [work(c) for c in cells]

    records = []
    for scheme in config.schemes:
        overhead = sim.pilot_overhead(scheme)
        for s, snr in enumerate(config.snr_db):
            rows = results[s * n_trials:(s + 1) * n_trials]
            casc = [r[scheme][0] for r in rows]
            direct = [r[scheme][1] for r in rows]
            mean = math.fsum(casc) / n_trials
            if n_trials > 1:
                var = math.fsum((x - mean) ** 2 for x in casc) / (n_trials - 1)
                stderr = math.sqrt(var / n_trials)
            else:
                stderr = 0.0
            records.append(MetricRecord(scheme, float(snr), mean, math.fsum(direct) / n_trials,
                                        stderr, n_trials, overhead))
            log.info("%s snr=%g dB nmse=%.4g (+-%.2g)", scheme, snr, mean, stderr)
    return records


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def export_records(records: Sequence[MetricRecord], path, format: str = "csv") -> None:
    """Write records as CSV (fixed column order, 17 significant digits) or JSON."""
    path = Path(path)
    if format not in ("csv", "json"):
        raise InvalidArgumentError(f"unknown export format {format!r}")
    try:
        with path.open("w", newline="") as fh:
            if format == "csv":
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(CSV_COLUMNS)
                for r in records:
                    writer.writerow([r.scheme] + [_fmt(getattr(r, c)) for c in CSV_COLUMNS[1:]])
            else:
                json.dump([asdict(r) for r in records], fh, indent=2)
                fh.write("\n")
    except OSError as exc:
        raise ExportError(f"cannot write results to {path}: {exc}") from exc


def read_records(path) -> list[MetricRecord]:
    """Parse a CSV or JSON file written by :func:`export_records`."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ExportError(f"cannot read results from {path}: {exc}") from exc
    if text.lstrip().startswith("["):
        return [MetricRecord(**row) for row in json.loads(text)]
    rows = list(csv.DictReader(text.splitlines()))
    return [
        MetricRecord(
            scheme=row["scheme"], snr_db=float(row["snr_db"]),
            nmse_cascaded=float(row["nmse_cascaded"]), nmse_direct=float(row["nmse_direct"]),
            stderr=float(row["stderr"]), trials=int(row["trials"]),
            pilot_overhead=float(row["pilot_overhead"]),
        )
        for row in rows
    ]
