"""Array responses for the BS ULA and the RIS uniform planar array.

All angles are in radians and measured from the array axis, so a ULA
element ``k`` sees the phase ``2*pi*spacing*k*cos(angle)``.  Element
indices are zero-based throughout; element ``n`` of the RIS sits at row
``n // n_h`` and column ``n % n_h`` (row-by-row ordering).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

__all__ = [
    "AngleGrid",
    "PlanarArrayGeometry",
    "angle_grid",
    "beam_matrix",
    "sampling_angles",
    "ula_matrix",
    "ula_response",
    "upa_response",
]


def _check_finite(*angles) -> None:
    for a in angles:
        if not np.all(np.isfinite(a)):
            raise InvalidArgumentError(f"angle must be finite, got {a!r}")


def ula_response(size: int, angle: float, spacing: float = 0.5) -> np.ndarray:
    """Unit-norm response of a ``size``-element ULA towards ``angle``.

    Parameters
    ----------
    size : int
        Number of elements.
    angle : float
        Arrival angle in radians relative to the array axis.
    spacing : float
        Element spacing in wavelengths.

    Returns
    -------
    ndarray, shape (size,)
    """
    if size < 1:
        raise InvalidArgumentError(f"size must be >= 1, got {size}")
    _check_finite(angle)
    k = np.arange(size)
    return np.exp(2j * np.pi * spacing * k * np.cos(angle)) / np.sqrt(size)


def ula_matrix(size: int, angles, spacing: float = 0.5) -> np.ndarray:
    """Stack ULA responses column-wise, one column per angle."""
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    if size < 1:
        raise InvalidArgumentError(f"size must be >= 1, got {size}")
    _check_finite(angles)
    k = np.arange(size)[:, None]
    return np.exp(2j * np.pi * spacing * k * np.cos(angles)[None, :]) / np.sqrt(size)


def sampling_angles(count: int) -> np.ndarray:
    """Angles whose ULA responses form an orthonormal basis.

    The cosines are ``1 - 2n/count`` for ``n = 0..count-1``, i.e. uniformly
    spaced by ``2/count``.
    """
    if count < 1:
        raise InvalidArgumentError(f"count must be >= 1, got {count}")
    n = np.arange(count)
    return np.arccos(1.0 - 2.0 * n / count)


@dataclass(frozen=True)
class AngleGrid:
    azimuth_samples: np.ndarray
    elevation_samples: np.ndarray


@dataclass(frozen=True)
class PlanarArrayGeometry:
    """Rectangular RIS panel with ``n_h`` elements per row and ``n_v`` per column."""

    n_h: int
    n_v: int
    spacing_h: float = 0.5
    spacing_v: float = 0.5

    def __post_init__(self):
        if int(self.n_h) != self.n_h or int(self.n_v) != self.n_v:
            raise InvalidArgumentError("panel dimensions must be integers")
        if self.n_h < 1 or self.n_v < 1:
            raise InvalidArgumentError(
                f"panel dimensions must be positive, got {self.n_h}x{self.n_v}"
            )
        if self.spacing_h <= 0 or self.spacing_v <= 0:
            raise InvalidArgumentError("element spacing must be positive")

    @property
    def n_elements(self) -> int:
        return self.n_h * self.n_v

    def horizontal_index(self, n):
        return np.asarray(n) % self.n_h

    def vertical_index(self, n):
        return np.asarray(n) // self.n_h

    def element_positions(self) -> np.ndarray:
        """Element coordinates in wavelengths, shape (N, 3), x-coordinate zero."""
        n = np.arange(self.n_elements)
        pos = np.zeros((self.n_elements, 3))
        pos[:, 1] = self.horizontal_index(n) * self.spacing_h
        pos[:, 2] = self.vertical_index(n) * self.spacing_v
        return pos


def angle_grid(geometry: PlanarArrayGeometry) -> AngleGrid:
    return AngleGrid(
        azimuth_samples=sampling_angles(geometry.n_h),
        elevation_samples=sampling_angles(geometry.n_v),
    )


def upa_response(geometry: PlanarArrayGeometry, azimuth: float, elevation: float) -> np.ndarray:
    """RIS response ``e_V(elevation) kron e_H(azimuth)``, unit norm, length N."""
    _check_finite(azimuth, elevation)
    return np.kron(
        ula_response(geometry.n_v, elevation, geometry.spacing_v),
        ula_response(geometry.n_h, azimuth, geometry.spacing_h),
    )


def upa_matrix(geometry: PlanarArrayGeometry, azimuths, elevations) -> np.ndarray:
    """Column-stacked RIS responses for paired azimuth/elevation arrays, shape (N, L)."""
    az = np.atleast_1d(np.asarray(azimuths, dtype=float))
    el = np.atleast_1d(np.asarray(elevations, dtype=float))
    if az.shape != el.shape:
        raise InvalidArgumentError("azimuth and elevation arrays must have equal shape")
    eh = ula_matrix(geometry.n_h, az, geometry.spacing_h)
    ev = ula_matrix(geometry.n_v, el, geometry.spacing_v)
    # column-wise Kronecker: row index n = i_v * n_h + i_h
    return (ev[:, None, :] * eh[None, :, :]).reshape(geometry.n_elements, az.size)


def beam_matrix(geometry: PlanarArrayGeometry) -> np.ndarray:
    """Common beam basis ``V = V_V kron V_H``; unitary at half-wavelength spacing.

    Column ``n`` is the RIS response at ``(azimuth_samples[n % n_h],
    elevation_samples[n // n_h])``.
    """
    grid = angle_grid(geometry)
    vh = ula_matrix(geometry.n_h, grid.azimuth_samples, geometry.spacing_h)
    vv = ula_matrix(geometry.n_v, grid.elevation_samples, geometry.spacing_v)
    return np.kron(vv, vh)
