"""Monte Carlo channel: discrete scatterers, the compensated equivalent channel
and a periodogram estimate of its PSD.

The autocorrelation convention is ``R(tau) = E{g(t) g*(t + tau)}``, so the PSD
of a single path with Doppler ``+w`` sits at ``-w`` relative to the usual
``E{g(t + tau) g*(t)}`` convention; :func:`numerical_psd` flips its frequency
axis accordingly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .array import AodRegion, ArrayGeometry, BeamformerBank, _check_weights, _frozen
from .errors import DomainError
from .spectrum import PsdCurve

REFERENCE_FD = 1.0  # Hz, frequency scale used when f_d = 0


@dataclass(frozen=True, eq=False)
class ScattererSet:
    """Discrete sampling of the angular channel gain.

    ``rx_angles`` (one per scatterer) is only needed by the link simulator.
    """

    angles: np.ndarray
    gains: np.ndarray
    phases: np.ndarray
    rx_angles: Optional[np.ndarray] = None

    def __post_init__(self):
        angles = _frozen(self.angles)
        gains = _frozen(self.gains)
        phases = _frozen(self.phases)
        if not angles.size == gains.size == phases.size:
            raise DomainError("angles, gains and phases must have equal length")
        if np.any(gains < 0):
            raise DomainError("gains must be nonnegative")
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "phases", phases)
        if self.rx_angles is not None:
            rx = _frozen(self.rx_angles)
            if rx.size != angles.size:
                raise DomainError("need one rx angle per scatterer")
            object.__setattr__(self, "rx_angles", rx)

    @property
    def p(self) -> int:
        return int(self.angles.size)

    @property
    def kappa(self) -> np.ndarray:
        """Complex path gains ``alpha_p exp(j phi_p)``."""
        return self.gains * np.exp(1j * self.phases)


@dataclass(frozen=True, eq=False)
class EquivalentChannelTrace:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = _frozen(self.times)
        v = _frozen(self.values, dtype=complex)
        if t.size != v.size:
            raise DomainError("times and values differ in length")
        if t.size > 2 and not np.allclose(np.diff(t), t[1] - t[0], rtol=1e-9, atol=0.0):
            raise DomainError("times must be equally spaced")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)


def draw_scatterers(region: AodRegion, count_p: int, seed, with_rx_angles: bool = False) -> ScattererSet:
    """Sum-of-sinusoids scatterers: uniform angles and phases, gains ``1/sqrt(P)``.

    ``seed`` is anything :func:`numpy.random.default_rng` accepts, including a
    ``Generator`` (which is then advanced).
    """
    if count_p < 1:
        raise DomainError(f"count_p must be >= 1, got {count_p}")
    rng = np.random.default_rng(seed)
    angles = rng.uniform(region.theta_l, region.theta_r, count_p)
    phases = rng.uniform(0.0, 2 * np.pi, count_p)
    rx = rng.uniform(0.0, np.pi, count_p) if with_rx_angles else None
    return ScattererSet(angles, np.full(count_p, 1.0 / math.sqrt(count_p)), phases, rx)


def _branch_factors(geom, bank, scat, omega_d, times):
    """``S[r, t]`` (scatterer side) and ``T[r, t]`` (beamformer side) with ``g = sum_r u_r S T``."""
    d = geom.displacements
    cp = np.cos(scat.angles)
    cq = bank.cosines
    a_p = np.exp(2j * np.pi * np.outer(d, cp)) * scat.kappa
    a_q = np.exp(-2j * np.pi * np.outer(d, cq)) * np.exp(-1j * bank.phases)
    s = a_p @ np.exp(1j * omega_d * np.outer(cp, times))
    t = a_q @ np.exp(-1j * omega_d * np.outer(cq, times))
    return s, t


def equivalent_channel(
    scat: ScattererSet,
    geom: ArrayGeometry,
    bank: BeamformerBank,
    f_d: float,
    times,
    weights=None,
) -> EquivalentChannelTrace:
    """Doppler-compensated equivalent channel ``g(t)`` (or ``g_AW(t)`` with weights).

    Evaluates ``(1/sqrt(Q)) sum_q sum_p kappa_p G(cos theta_p, cos vartheta_q)
    exp(j w_d (cos theta_p - cos vartheta_q) t - j phi_q)`` through its rank-M
    factorization over antennas.  The transmit normalization is left out.
    """
    u = _check_weights(geom, weights)
    t = np.asarray(times, dtype=float).reshape(-1)
    s, tq = _branch_factors(geom, bank, scat, 2 * np.pi * f_d, t)
    g = (u @ (s * tq)) / (geom.m * math.sqrt(bank.q))
    return EquivalentChannelTrace(t, g)


def autocorrelation(values) -> np.ndarray:
    """Biased ensemble autocorrelation ``R[k] = avg g[n] g*[n + k]``, lags ``0..N-1``.

    ``values`` has one realization per row.  Every lag is normalized by ``N``.
    """
    g = np.atleast_2d(np.asarray(values, dtype=complex))
    n = g.shape[1]
    spec = np.fft.fft(g, 2 * n, axis=1)
    # ifft(|G|^2)[k] = sum_n g[n+k] g*[n]; conjugate for the g[n] g*[n+k] order
    r = np.conj(np.fft.ifft(np.abs(spec) ** 2, axis=1)[:, :n]) / n
    return r.mean(axis=0)


def numerical_psd(
    region: AodRegion,
    geom: ArrayGeometry,
    bank: BeamformerBank,
    f_d: float,
    n_points: int = 2048,
    n_realizations: int = 1000,
    seed=0,
    weights=None,
    n_scatterers: int = 256,
    block: int = 32,
) -> PsdCurve:
    """Averaged-periodogram PSD of the equivalent channel.

    Each realization draws fresh scatterers and fresh bank phases.  Samples
    are spaced ``1 / (8 mu f_d)`` apart, so the ``n_points`` DFT bins span
    ``|w~| < 4 mu``.  The periodogram ``T_s |DFT(g)|^2 / N`` is the DFT of the
    biased autocorrelation folded to ``N`` lags.

    Parameters
    ----------
    block : int
        Time samples per block when building the per-scatterer exponentials
        as outer products (speed only; results do not depend on it beyond
        rounding).

    Returns
    -------
    PsdCurve
        Values on ``n_points`` ascending bins of ``w~``.  With ``f_d = 0`` the
        axis is normalized by a 1 Hz reference.
    """
    if n_points < 256 or n_points & (n_points - 1):
        raise DomainError(f"n_points must be a power of two >= 256, got {n_points}")
    if n_realizations < 1:
        raise DomainError("n_realizations must be >= 1")
    if f_d < 0:
        raise DomainError("f_d must be nonnegative")
    u = _check_weights(geom, weights)
    fd_axis = f_d if f_d > 0 else REFERENCE_FD
    omega_d = 2 * np.pi * f_d
    ts = 1.0 / (8 * region.mu * fd_axis)
    times = np.arange(n_points) * ts
    if n_points % block:
        block = 1
    t_fine, t_coarse = times[:block], times[::block]

    rng = np.random.default_rng(seed)
    d = geom.displacements
    cq = bank.cosines
    # beamformer side: fixed directions, phases redrawn per realization
    a_q = np.exp(-2j * np.pi * np.outer(d, cq))
    y_q = np.exp(-1j * omega_d * np.outer(cq, times))
    norm = geom.m * math.sqrt(bank.q)
    acc = np.zeros(n_points)
    for _ in range(n_realizations):
        scat = draw_scatterers(region, n_scatterers, rng)
        phq = rng.uniform(0.0, 2 * np.pi, bank.q)
        cp = np.cos(scat.angles)
        x = (np.exp(1j * omega_d * np.outer(cp, t_coarse))[:, :, None]
             * np.exp(1j * omega_d * np.outer(cp, t_fine))[:, None, :]).reshape(cp.size, n_points)
        s = (np.exp(2j * np.pi * np.outer(d, cp)) * scat.kappa) @ x
        t = (a_q * np.exp(-1j * phq)) @ y_q
        g = (u @ (s * t)) / norm
        acc += np.abs(np.fft.fft(g)) ** 2
    pxx = acc / n_realizations * ts / n_points
    # R(tau) = E{g(t) g*(t + tau)} mirrors the frequency axis: bin k -> bin -k
    pxx = np.roll(pxx[::-1], 1)
    omega = np.fft.fftfreq(n_points, ts) * 2 * np.pi
    order = np.argsort(omega)
    return PsdCurve(omega[order] / (2 * np.pi * fd_axis), pxx[order], 2 * np.pi * fd_axis)


def relative_l2(reference: PsdCurve, estimate: PsdCurve, mu: float) -> float:
    """Relative L2 distance ``||est - ref|| / ||ref||`` over ``|w~| <= mu``.

    Points are paired by grid position (to 1e-9); estimate points with no
    reference partner, such as ones the reference excluded as infinite, are
    skipped.
    """
    xr, xe = reference.omega_tilde, estimate.omega_tilde
    idx = np.clip(np.searchsorted(xr, xe), 1, max(xr.size - 1, 1))
    near = np.where(np.abs(xr[idx - 1] - xe) <= np.abs(xr[idx] - xe), idx - 1, idx)
    keep = (np.abs(xr[near] - xe) <= 1e-9 * np.maximum(1.0, np.abs(xe))) & (np.abs(xe) <= mu)
    a = reference.values[near[keep]]
    b = estimate.values[keep]
    return float(np.linalg.norm(b - a) / np.linalg.norm(a))
