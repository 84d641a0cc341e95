"""OFDM uplink Monte Carlo with Doppler pre-compensation and antenna weighting.

Frame layout: ``blocks_per_frame`` OFDM blocks of ``N`` subcarriers, each
preceded by an ``N_cp``-sample cyclic prefix; block 0 carries pilots.  All
time-varying phases are evaluated at the global sample index ``i`` of the
frame, sample period ``T_s = T_b / (N + N_cp)``.

Transmitter, per emitted sample ``i``::

    x(i) = eta * sum_q diag(u) a*(vartheta_q) e^{-j phi_q} / (M sqrt(Q))
                 * e^{-j w_d cos(vartheta_q) i T_s} * s(i)

Channel, per receive antenna ``k`` and tap ``l`` with delay ``d_l``::

    y_k(i) = L^{-1/2} sum_p kappa_p a_rx,k(theta'_p) a^T(theta_p) x(i - d_l)
             e^{j w_d cos(theta_p) (i - d_l) T_s} + n_k(i)
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .array import AodRegion, ArrayGeometry, BeamformerBank, _check_weights, normalization_eta
from .channel import ScattererSet, draw_scatterers
from .errors import DomainError
from .spectrum import closed_form_window
from .weighting import assemble_c_matrices, optimal_weights

CONSTELLATIONS = ("qam16", "qpsk")
WEIGHT_MODES = ("equal", "optimal")


@dataclass(frozen=True)
class OfdmConfig:
    """OFDM frame parameters.

    Parameters
    ----------
    n_subcarriers : int
        FFT size ``N`` (power of two).
    cp_len : int
        Cyclic-prefix length; must cover the largest tap delay.
    blocks_per_frame : int
        Blocks per frame including the pilot block.
    t_block : float
        Block duration ``T_b`` in seconds, cyclic prefix included.
    constellation : str
        ``"qam16"`` or ``"qpsk"``.
    taps : tuple of int
        Tap delays in samples.
    n_scatterers : int
        Scatterers per tap.
    """

    n_subcarriers: int = 128
    cp_len: int = 16
    blocks_per_frame: int = 5
    t_block: float = 1e-4
    constellation: str = "qam16"
    taps: tuple = (0,)
    n_scatterers: int = 256

    def __post_init__(self):
        n = self.n_subcarriers
        if n < 1 or n & (n - 1):
            raise DomainError(f"n_subcarriers must be a power of two, got {n}")
        if self.blocks_per_frame < 2:
            raise DomainError("a frame needs a pilot block and at least one data block")
        if not self.t_block > 0:
            raise DomainError("t_block must be positive")
        if self.constellation not in CONSTELLATIONS:
            raise DomainError(f"unknown constellation {self.constellation!r}")
        taps = tuple(int(d) for d in self.taps)
        if not taps or min(taps) < 0:
            raise DomainError("taps must be a nonempty list of nonnegative delays")
        if max(taps) >= n:
            raise DomainError(f"tap delay {max(taps)} must be < N = {n}")
        if self.cp_len < max(taps):
            raise DomainError(f"cp_len {self.cp_len} shorter than largest delay {max(taps)}")
        object.__setattr__(self, "taps", taps)

    @property
    def block_len(self) -> int:
        return self.n_subcarriers + self.cp_len

    @property
    def frame_len(self) -> int:
        return self.blocks_per_frame * self.block_len

    @property
    def t_sample(self) -> float:
        return self.t_block / self.block_len

    @property
    def data_symbols_per_frame(self) -> int:
        return (self.blocks_per_frame - 1) * self.n_subcarriers


@dataclass(frozen=True)
class LinkResult:
    ser: float
    symbols_tested: int
    snr_db: float
    seed: int
    errors: int = 0

    def confidence_interval(self, level: float = 0.95) -> tuple:
        """Clopper-Pearson interval for the symbol error rate."""
        k, n = self.errors, self.symbols_tested
        a = 1.0 - level
        lo = 0.0 if k == 0 else stats.beta.ppf(a / 2, k, n - k + 1)
        hi = 1.0 if k == n else stats.beta.ppf(1 - a / 2, k + 1, n - k)
        return float(lo), float(hi)


# -- constellations ----------------------------------------------------------

def constellation_points(name: str) -> np.ndarray:
    """Unit-average-energy constellation, Gray mapped along each axis."""
    if name == "qpsk":
        levels = np.array([-1.0, 1.0])
    elif name == "qam16":
        levels = np.array([-3.0, -1.0, 3.0, 1.0])  # Gray order 00, 01, 10, 11
    else:
        raise DomainError(f"unknown constellation {name!r}")
    pts = (levels[:, None] + 1j * levels[None, :]).reshape(-1)
    return pts / math.sqrt(np.mean(np.abs(pts) ** 2))


def random_payload(cfg: OfdmConfig, rng) -> np.ndarray:
    """Symbol indices of one frame, shape ``(blocks, N)``; row 0 is the pilot block."""
    rng = np.random.default_rng(rng)
    size = constellation_points(cfg.constellation).size
    return rng.integers(0, size, (cfg.blocks_per_frame, cfg.n_subcarriers))


def _nearest(points: np.ndarray, z: np.ndarray) -> np.ndarray:
    return np.argmin(np.abs(z[..., None] - points), axis=-1)


# -- transmitter --------------------------------------------------------------

def transmit_frame(
    cfg: OfdmConfig,
    geom: ArrayGeometry,
    bank: BeamformerBank,
    f_d: float,
    weights=None,
    payload: Optional[np.ndarray] = None,
    seed=0,
) -> np.ndarray:
    """Per-antenna baseband samples of one frame, shape ``(M, blocks * (N + N_cp))``.

    ``payload`` defaults to :func:`random_payload` drawn from ``seed``.  The
    OFDM modulator is the unitary IFFT, so time samples have unit mean power.
    """
    if max(cfg.taps) >= cfg.n_subcarriers:
        raise DomainError("tap delay must be smaller than N")
    u = _check_weights(geom, weights)
    if payload is None:
        payload = random_payload(cfg, seed)
    pts = constellation_points(cfg.constellation)
    freq = pts[np.asarray(payload)]
    if freq.shape != (cfg.blocks_per_frame, cfg.n_subcarriers):
        raise DomainError(f"payload must have shape {(cfg.blocks_per_frame, cfg.n_subcarriers)}")
    time_blocks = np.fft.ifft(freq, axis=1, norm="ortho")
    stream = np.concatenate([time_blocks[:, -cfg.cp_len:], time_blocks], axis=1).reshape(-1) \
        if cfg.cp_len else time_blocks.reshape(-1)

    eta = normalization_eta(geom, bank, u)
    # column q: diag(u) a*(vartheta_q) e^{-j phi_q} eta / (M sqrt(Q))
    a_conj = np.exp(-2j * np.pi * np.outer(geom.displacements, bank.cosines))
    beams = (u[:, None] * a_conj) * np.exp(-1j * bank.phases) * (eta / (geom.m * math.sqrt(bank.q)))
    idx = np.arange(cfg.frame_len)
    psi = np.exp(-2j * np.pi * f_d * cfg.t_sample * np.outer(bank.cosines, idx))
    return (beams @ psi) * stream


# -- channel ------------------------------------------------------------------

def noise_variance(snr_db: float) -> float:
    return 0.0 if math.isinf(snr_db) and snr_db > 0 else 10.0 ** (-snr_db / 10.0)


def propagate(
    signal: np.ndarray,
    scatterer_sets: Sequence[ScattererSet],
    geom: ArrayGeometry,
    rx_geom: ArrayGeometry,
    f_d: float,
    cfg: OfdmConfig,
) -> np.ndarray:
    """Noise-free received samples, shape ``(n_rx, frame_len)`` (cyclic prefixes kept)."""
    if len(scatterer_sets) != len(cfg.taps):
        raise DomainError(f"need {len(cfg.taps)} scatterer sets, one per tap")
    n_tot = signal.shape[1]
    idx = np.arange(n_tot)
    out = np.zeros((rx_geom.m, n_tot), dtype=complex)
    for delay, scat in zip(cfg.taps, scatterer_sets):
        if scat.rx_angles is None:
            raise DomainError("scatterers need rx angles for the link simulation")
        cp = np.cos(scat.angles)
        delayed = np.zeros_like(signal)
        delayed[:, delay:] = signal[:, :n_tot - delay]
        # a^T(theta_p) x(i - d_l)
        z = np.exp(2j * np.pi * np.outer(cp, geom.displacements)) @ delayed
        phi = np.exp(2j * np.pi * f_d * cfg.t_sample * np.outer(cp, idx - delay))
        rx = np.exp(2j * np.pi * np.outer(rx_geom.displacements, np.cos(scat.rx_angles)))
        out += (rx * scat.kappa) @ (phi * z)
    return out / math.sqrt(len(cfg.taps))


def _strip_cp(samples: np.ndarray, cfg: OfdmConfig) -> np.ndarray:
    blocks = samples.reshape(samples.shape[0], cfg.blocks_per_frame, cfg.block_len)
    return blocks[:, :, cfg.cp_len:]


def apply_channel(
    signal: np.ndarray,
    scatterer_sets: Sequence[ScattererSet],
    geom: ArrayGeometry,
    rx_geom: ArrayGeometry,
    f_d: float,
    cfg: OfdmConfig,
    snr_db: float,
    seed=0,
) -> np.ndarray:
    """Received time-domain blocks, shape ``(n_rx, blocks, N)``, cyclic prefixes removed.

    Noise is circular complex Gaussian with per-sample variance
    ``10^(-snr_db/10)``; ``snr_db = inf`` is noise free.
    """
    clean = _strip_cp(propagate(signal, scatterer_sets, geom, rx_geom, f_d, cfg), cfg)
    return clean + _noise(clean.shape, snr_db, seed)


def _noise(shape, snr_db, seed) -> np.ndarray:
    var = noise_variance(snr_db)
    if var == 0.0:
        return np.zeros(shape, dtype=complex)
    rng = np.random.default_rng(seed)
    return math.sqrt(var / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


# -- receiver -----------------------------------------------------------------

def receive_detect(received: np.ndarray, cfg: OfdmConfig, payload: np.ndarray, snr_db: float = math.inf,
                   seed: int = 0) -> LinkResult:
    """LS pilot estimate, MRC over receive antennas, nearest-point decisions.

    ``received`` is the output of :func:`apply_channel`.  Subcarriers whose
    estimate is zero on every antenna are erased and count as errors.
    """
    pts = constellation_points(cfg.constellation)
    payload = np.asarray(payload)
    spec = np.fft.fft(received, axis=2, norm="ortho")
    h = spec[:, 0, :] / pts[payload[0]]
    gain = np.sum(np.abs(h) ** 2, axis=0)
    data = spec[:, 1:, :]
    erased = gain == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        combined = np.sum(np.conj(h)[:, None, :] * data, axis=0) / gain
    decided = _nearest(pts, np.where(erased, 0.0, combined))
    wrong = (decided != payload[1:]) | erased[None, :]
    errors = int(wrong.sum())
    tested = int(wrong.size)
    return LinkResult(errors / tested, tested, float(snr_db), int(seed), errors)


# -- sweeps -------------------------------------------------------------------

def weights_for_mode(mode: str, geom: ArrayGeometry, region: AodRegion, layout: str = "equicos"):
    """All-ones weights or the Doppler-spread-optimal weights for the closed-form window."""
    if mode == "equal":
        return np.ones(geom.m, dtype=complex)
    if mode == "optimal":
        win = closed_form_window(region, layout)
        return optimal_weights(assemble_c_matrices(geom, region, win)).weights
    raise DomainError(f"unknown weights mode {mode!r}; expected one of {WEIGHT_MODES}")


@dataclass(frozen=True)
class _FrameJob:
    cfg: OfdmConfig
    geom: ArrayGeometry
    rx_geom: ArrayGeometry
    bank: BeamformerBank
    region: AodRegion
    f_d: float
    weights: np.ndarray
    snr_list: tuple
    seed_seq: np.random.SeedSequence = field(compare=False)


def _run_frame(job: _FrameJob) -> np.ndarray:
    """Error counts of one frame at every SNR point."""
    s_scat, s_phase, s_payload, s_noise = job.seed_seq.spawn(4)
    cfg = job.cfg
    scats = [draw_scatterers(job.region, cfg.n_scatterers, rng, with_rx_angles=True)
             for rng in (np.random.default_rng(s) for s in s_scat.spawn(len(cfg.taps)))]
    bank = job.bank.with_phases(np.random.default_rng(s_phase).uniform(0, 2 * np.pi, job.bank.q))
    payload = random_payload(cfg, np.random.default_rng(s_payload))
    tx = transmit_frame(cfg, job.geom, bank, job.f_d, job.weights, payload)
    clean = _strip_cp(propagate(tx, scats, job.geom, job.rx_geom, job.f_d, cfg), cfg)
    counts = []
    for snr, ns in zip(job.snr_list, s_noise.spawn(len(job.snr_list))):
        rx = clean + _noise(clean.shape, snr, np.random.default_rng(ns))
        counts.append(receive_detect(rx, cfg, payload, snr).errors)
    return np.array(counts)


def worker_count(requested: int = 1) -> int:
    """Requested workers, capped by ``DOPPLERSPREAD_THREADS`` when set."""
    cap = os.environ.get("DOPPLERSPREAD_THREADS")
    n = max(1, int(requested))
    if cap:
        n = min(n, max(1, int(cap)))
    return n


def run_ser_sweep(
    cfg: OfdmConfig,
    geom: ArrayGeometry,
    rx_geom: ArrayGeometry,
    bank: BeamformerBank,
    region: AodRegion,
    f_d: float,
    weights_mode,
    snr_list,
    frames: int,
    seed: int = 0,
    workers: int = 1,
) -> list:
    """SER versus SNR for one weighting mode.

    Every frame draws fresh scatterers, bank phases, payload and noise from a
    child of ``SeedSequence(seed)``.  Two sweeps with the same seed and
    different ``weights_mode`` therefore see identical random draws, which
    makes their comparison paired.  ``weights_mode`` may also be an explicit
    weight vector.
    """
    if frames < 1:
        raise DomainError(f"frames must be >= 1, got {frames}")
    if isinstance(weights_mode, str):
        weights = weights_for_mode(weights_mode, geom, region, bank.layout if bank.layout != "explicit" else "equicos")
    else:
        weights = _check_weights(geom, weights_mode)
    snrs = tuple(float(s) for s in snr_list)
    jobs = [_FrameJob(cfg, geom, rx_geom, bank, region, f_d, weights, snrs, ss)
            for ss in np.random.SeedSequence(seed).spawn(frames)]
    n = worker_count(workers)
    if n > 1:
        with ProcessPoolExecutor(n) as pool:
            counts = list(pool.map(_run_frame, jobs, chunksize=max(1, frames // (4 * n))))
    else:
        counts = [_run_frame(j) for j in jobs]
    totals = np.sum(counts, axis=0)
    tested = frames * cfg.data_symbols_per_frame
    return [LinkResult(int(e) / tested, tested, snr, int(seed), int(e)) for snr, e in zip(snrs, totals)]
