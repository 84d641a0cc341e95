"""Linear-array geometry, steering vectors and beamformer banks.

All angles are in radians and all displacements are in units of the carrier
wavelength.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionError, DomainError, NumericError

LAYOUTS = ("equicos", "equiangle", "explicit")


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype).reshape(-1)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    """Element positions of a linear array, relative to the first element.

    ``displacements[r]`` is the distance between element ``r`` and element 0
    divided by the wavelength.
    """

    displacements: np.ndarray

    def __post_init__(self):
        d = _frozen(self.displacements)
        if d.size < 1:
            raise DomainError("an array needs at least one element")
        if d[0] != 0.0:
            raise DomainError("displacements[0] must be exactly 0")
        if not np.all(np.isfinite(d)):
            raise DomainError("displacements must be finite")
        if np.any(np.diff(d) <= 0):
            raise DomainError("displacements must be strictly increasing")
        object.__setattr__(self, "displacements", d)

    @classmethod
    def ula(cls, m: int, spacing: float) -> "ArrayGeometry":
        """Uniform linear array of ``m`` elements spaced ``spacing`` wavelengths apart."""
        if m < 1:
            raise DomainError(f"element count must be >= 1, got {m}")
        if not spacing > 0:
            raise DomainError(f"spacing must be positive, got {spacing}")
        return cls(np.arange(m) * float(spacing))

    @property
    def m(self) -> int:
        return int(self.displacements.size)

    @property
    def uniform_spacing(self) -> Optional[float]:
        """Element spacing if the array is uniform, otherwise ``None``."""
        if self.m == 1:
            return None
        steps = np.diff(self.displacements)
        if np.allclose(steps, steps[0], rtol=1e-12, atol=0.0):
            return float(steps[0])
        return None

    def __repr__(self):
        return f"ArrayGeometry(m={self.m}, displacements={self.displacements.tolist()})"


@dataclass(frozen=True)
class AodRegion:
    """Angle-of-departure interval ``(theta_l, theta_r)``."""

    theta_l: float
    theta_r: float

    def __post_init__(self):
        if not (0.0 <= self.theta_l < self.theta_r <= math.pi):
            raise DomainError(
                f"need 0 <= theta_l < theta_r <= pi, got ({self.theta_l}, {self.theta_r})"
            )
        if not self.mu > 0:
            raise DomainError("degenerate region: cos(theta_l) - cos(theta_r) must be > 0")

    @classmethod
    def jakes(cls) -> "AodRegion":
        return cls(0.0, math.pi)

    @classmethod
    def from_degrees(cls, theta_l: float, theta_r: float) -> "AodRegion":
        return cls(math.radians(theta_l), math.radians(theta_r))

    @property
    def mu(self) -> float:
        """Half-width of the normalized Doppler support."""
        return math.cos(self.theta_l) - math.cos(self.theta_r)

    @property
    def mean_aod(self) -> float:
        return 0.5 * (self.theta_l + self.theta_r)

    @property
    def angular_spread(self) -> float:
        return 0.5 * (self.theta_r - self.theta_l)

    @property
    def width(self) -> float:
        return self.theta_r - self.theta_l

    @property
    def is_jakes(self) -> bool:
        return abs(self.theta_l) < 1e-12 and abs(self.theta_r - math.pi) < 1e-12


@dataclass(frozen=True, eq=False)
class BeamformerBank:
    """Directions and random phases of the multi-branch transmit beamformer."""

    directions: np.ndarray
    phases: np.ndarray
    layout: str
    region: AodRegion

    def __post_init__(self):
        dirs = _frozen(self.directions)
        phases = _frozen(self.phases)
        if dirs.size < 1:
            raise DomainError("a bank needs at least one direction")
        if phases.shape != dirs.shape:
            raise DimensionError(
                f"{dirs.size} directions but {phases.size} phases"
            )
        if self.layout not in LAYOUTS:
            raise DomainError(f"unknown layout {self.layout!r}; expected one of {LAYOUTS}")
        r = self.region
        if np.any(dirs <= r.theta_l) or np.any(dirs >= r.theta_r):
            raise DomainError("every direction must lie strictly inside (theta_l, theta_r)")
        object.__setattr__(self, "directions", dirs)
        object.__setattr__(self, "phases", phases)

    @property
    def q(self) -> int:
        return int(self.directions.size)

    @property
    def cosines(self) -> np.ndarray:
        return np.cos(self.directions)

    def with_phases(self, phases) -> "BeamformerBank":
        return BeamformerBank(self.directions, phases, self.layout, self.region)


def _check_theta(theta):
    t = np.asarray(theta, dtype=float)
    if np.any(t < 0) or np.any(t > math.pi) or np.any(np.isnan(t)):
        raise DomainError(f"angle outside [0, pi]: {theta}")
    return t


def _check_weights(geom: ArrayGeometry, weights) -> np.ndarray:
    if weights is None:
        return np.ones(geom.m, dtype=complex)
    u = np.asarray(weights, dtype=complex).reshape(-1)
    if u.size != geom.m:
        raise DimensionError(f"expected {geom.m} weights, got {u.size}")
    return u


def steering_vector(geom: ArrayGeometry, theta: float) -> np.ndarray:
    """Array response ``a(theta)`` with elements ``exp(j 2 pi d_r cos(theta))``."""
    _check_theta(theta)
    return np.exp(2j * np.pi * geom.displacements * math.cos(theta))


def steering_matrix(geom: ArrayGeometry, thetas) -> np.ndarray:
    """Stack of steering vectors, shape ``(M, len(thetas))``."""
    t = _check_theta(thetas).reshape(-1)
    return np.exp(2j * np.pi * np.outer(geom.displacements, np.cos(t)))


def make_bank(region: AodRegion, q_count: int, layout: str, rng_seed: int) -> BeamformerBank:
    """Place ``q_count`` beamforming directions inside ``region``.

    Directions are the ``q_count`` interior points of an equispaced grid with
    ``q_count + 1`` steps, either in cosine (``"equicos"``) or in angle
    (``"equiangle"``), so the open-interval endpoints are never used.
    Phases are i.i.d. uniform on ``[0, 2 pi)`` drawn from
    ``numpy.random.default_rng(rng_seed)``.
    """
    if q_count < 1:
        raise DomainError(f"q_count must be >= 1, got {q_count}")
    cells = np.arange(1, q_count + 1) / (q_count + 1)
    if layout == "equicos":
        lo = math.cos(region.theta_r)
        cos_dirs = lo + cells * region.mu
        # descending cosine -> ascending angle
        directions = np.arccos(np.clip(cos_dirs, -1.0, 1.0))[::-1]
    elif layout == "equiangle":
        directions = region.theta_l + cells * region.width
    else:
        raise DomainError(f"make_bank supports 'equicos' and 'equiangle', got {layout!r}")
    phases = np.random.default_rng(rng_seed).uniform(0.0, 2 * np.pi, q_count)
    return BeamformerBank(directions, phases, layout, region)


def beam_gain(geom: ArrayGeometry, theta: float, vartheta: float, weights=None) -> complex:
    """Gain ``(1/M) a^H(vartheta) diag(u) a(theta)`` of the beam aimed at ``vartheta``."""
    _check_theta(theta)
    _check_theta(vartheta)
    u = _check_weights(geom, weights)
    delta = math.cos(theta) - math.cos(vartheta)
    return complex(np.sum(u * np.exp(2j * np.pi * geom.displacements * delta)) / geom.m)


def gain_matrix(geom: ArrayGeometry, thetas, varthetas, weights=None) -> np.ndarray:
    """Vectorised :func:`beam_gain`, shape ``(len(thetas), len(varthetas))``."""
    u = _check_weights(geom, weights)
    a_t = steering_matrix(geom, thetas)
    a_v = steering_matrix(geom, varthetas)
    return (a_t.T * u) @ a_v.conj() / geom.m


def beamformer_sum(geom: ArrayGeometry, bank: BeamformerBank, weights=None) -> np.ndarray:
    """Unnormalised superposition ``sum_q diag(u) a(vartheta_q) e^{j phi_q} / (M sqrt(Q))``."""
    u = _check_weights(geom, weights)
    a = steering_matrix(geom, bank.directions)
    return u * (a @ np.exp(1j * bank.phases)) / (geom.m * math.sqrt(bank.q))


def normalization_eta(geom: ArrayGeometry, bank: BeamformerBank, weights=None) -> float:
    """Scale that gives the (weighted) beamformer superposition unit Euclidean norm."""
    norm = float(np.linalg.norm(beamformer_sum(geom, bank, weights)))
    # sum of the branch-term norms; a total far below it means the phases cancelled
    scale = math.sqrt(bank.q) * float(np.linalg.norm(_check_weights(geom, weights))) / geom.m
    if not norm > 1e-12 * scale or not math.isfinite(norm):
        raise NumericError(
            f"beamformer superposition has norm {norm!r}; the bank phases cancel "
            "(redraw phases with another seed)"
        )
    return 1.0 / norm
