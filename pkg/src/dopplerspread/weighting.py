"""Doppler spread, the C0/C2 moment matrices and optimal antenna weights.

With antenna weights ``u`` the Doppler spread is the generalized Rayleigh
quotient ``omega_d sqrt(u^H C2 u / u^H C0 u)``, where

    C_k[r, s] = int_{-mu}^{mu} x^k W(x) exp(j 2 pi (d_r - d_s) x) dx.

The weights minimizing it are the generalized eigenvector of ``(C2, C0)``
with the smallest eigenvalue.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .array import AodRegion, ArrayGeometry, _check_weights
from .errors import DomainError, NumericError
from .spectrum import WindowFunction, beam_function, window_eval

QUAD_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class CMatrices:
    c0: np.ndarray
    c2: np.ndarray

    @property
    def m(self) -> int:
        return self.c0.shape[0]


@dataclass(frozen=True, eq=False)
class WeightVector:
    """Antenna weights plus the generalized eigenvalue they attain.

    ``normalization`` is ``"max_one"`` (largest modulus is 1, real positive)
    or ``"unit_c0"`` (``u^H C0 u == 1``).  ``real_valued`` is False when the
    optimum is genuinely complex, which happens for asymmetric windows.
    """

    weights: np.ndarray
    normalization: str
    eigenvalue: float
    real_valued: bool = True

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.weights, dtype=dtype)


# -- C-matrix assembly ------------------------------------------------------

GL_ORDER = 24
GRADING_LEVELS = 48


def _panel_edges(lo: float, hi: float, omega_max: float, refine: int) -> np.ndarray:
    """Panel boundaries on ``[lo, hi]``: uniform in the middle, geometric toward both ends.

    The window may be singular (log or square-root type) or kinked at the
    interval ends, so the end panels are halved ``GRADING_LEVELS`` times.
    """
    width = hi - lo
    n_mid = refine * (int(math.ceil(width * omega_max / 6.0)) + 4)
    edges = lo + width * np.linspace(0.0, 1.0, n_mid + 1)
    h0 = edges[1] - lo
    steps = h0 * 0.5 ** np.arange(1, GRADING_LEVELS + 1)
    return np.unique(np.concatenate([edges, lo + steps, hi - steps]))


def _nodes(lo: float, hi: float, omega_max: float, refine: int):
    t, w = np.polynomial.legendre.leggauss(GL_ORDER)
    edges = _panel_edges(lo, hi, omega_max, refine)
    a, b = edges[:-1, None], edges[1:, None]
    x = 0.5 * (a + b) + 0.5 * (b - a) * t
    return x.ravel(), (0.5 * (b - a) * w).ravel()


def _moments(win: WindowFunction, offsets: np.ndarray, refine: int) -> np.ndarray:
    """``[k, i] -> int x^k W(x) exp(j 2 pi offsets[i] x) dx`` for ``k = 0, 2``."""
    mu = win.mu
    omega_max = 2 * math.pi * float(np.max(np.abs(offsets), initial=0.0))
    pieces = [(0.0, mu)] if win.is_even else [(-mu, 0.0), (0.0, mu)]
    out = np.zeros((2, offsets.size), dtype=complex)
    for lo, hi in pieces:
        x, w = _nodes(lo, hi, omega_max, refine)
        wx = w * np.asarray(window_eval(win, x), dtype=float)
        if not np.all(np.isfinite(wx)):
            raise NumericError("window is infinite at a quadrature node")
        if win.is_even:
            # W even: the two halves combine to 2 * cos part
            kern = 2.0 * np.cos(2 * np.pi * np.outer(offsets, x))
        else:
            kern = np.exp(2j * np.pi * np.outer(offsets, x))
        out[0] += kern @ wx
        out[1] += kern @ (wx * x * x)
    return out


def assemble_c_matrices(geom: ArrayGeometry, region: AodRegion, win: WindowFunction) -> CMatrices:
    """Build ``C0`` and ``C2``, one integral pair per distinct element offset.

    Integrals use composite Gauss-Legendre on panels graded toward ``x = 0``
    and ``x = +-mu``, where the windows are singular or kinked.  The error of
    each entry is estimated against a rule with twice as many uniform panels;
    the refined values are returned and an estimate above ``QUAD_TOL`` raises
    :class:`NumericError`.
    """
    if not region.mu > 0:
        raise DomainError("window support is degenerate")
    if win.region != region:
        raise DomainError("window was built for a different AoD region")
    d = geom.displacements
    diff = d[:, None] - d[None, :]
    # offsets equal to 1e-12 share one integral (exact Toeplitz for a ULA)
    key = np.round(diff * 1e12).astype(np.int64)
    uniq, first, inverse = np.unique(key, return_index=True, return_inverse=True)
    offsets = diff.ravel()[first]
    coarse = _moments(win, offsets, 1)
    fine = _moments(win, offsets, 2)
    err = np.abs(fine - coarse)
    worst = np.unravel_index(np.argmax(err), err.shape)
    if err[worst] > QUAD_TOL:
        raise NumericError(
            f"quadrature did not reach {QUAD_TOL:g}: worst entry C{2 * worst[0]} at offset "
            f"{offsets[worst[1]]:g} has error estimate {err[worst]:.3g}"
        )
    inverse = inverse.reshape(diff.shape)
    c0, c2 = fine[0][inverse], fine[1][inverse]
    # Hermitian by construction; symmetrize away rounding
    c0 = 0.5 * (c0 + c0.conj().T)
    c2 = 0.5 * (c2 + c2.conj().T)
    return CMatrices(c0, c2)


# -- Doppler spread ---------------------------------------------------------

def _quadratic(c: np.ndarray, u: np.ndarray) -> float:
    return float(np.real(np.vdot(u, c @ u)))


def doppler_spread_from_matrices(cmats: CMatrices, omega_d: float, weights=None) -> float:
    u = np.ones(cmats.m, dtype=complex) if weights is None else np.asarray(weights, dtype=complex)
    den = _quadratic(cmats.c0, u)
    if not den > 0:
        raise DomainError("u^H C0 u must be positive; the weights lie in the null space of C0")
    num = max(_quadratic(cmats.c2, u), 0.0)
    return float(omega_d) * math.sqrt(num / den)


def doppler_spread(
    geom: ArrayGeometry,
    region: AodRegion,
    win: WindowFunction,
    omega_d: float,
    weights=None,
    cmats: CMatrices = None,
) -> float:
    """RMS Doppler spread (rad/s) of the compensated channel.

    Pass precomputed ``cmats`` to skip the quadrature when sweeping weights.
    """
    u = _check_weights(geom, weights)
    if cmats is None:
        cmats = assemble_c_matrices(geom, region, win)
    return doppler_spread_from_matrices(cmats, omega_d, u)


# -- optimal weights --------------------------------------------------------

def _c0_factor(c0: np.ndarray) -> np.ndarray:
    """A factor ``Q`` with ``C0 = Q Q^H``: Cholesky, or the eigen square root if pivots are tiny."""
    m = c0.shape[0]
    floor = 1e-12 * abs(np.trace(c0).real) / m
    evals = np.linalg.eigvalsh(c0)
    if evals[0] <= floor:
        eps = max(floor - evals[0], floor) * 10
        raise DomainError(
            f"C0 is numerically singular (min eigenvalue {evals[0]:.3g}); "
            f"regularize with C0 + eps*I, e.g. eps={eps:.3g}"
        )
    try:
        q = np.linalg.cholesky(c0)
        if np.min(np.abs(np.diag(q))) ** 2 >= floor:
            return q
    except np.linalg.LinAlgError:
        pass
    evals, vecs = np.linalg.eigh(c0)
    return vecs * np.sqrt(evals)


def optimal_weights(cmats: CMatrices, normalization: str = "max_one") -> WeightVector:
    """Antenna weights minimizing the Doppler spread.

    Factor ``C0 = Q Q^H``, take the eigenvector ``v`` of ``Q^-1 C2 Q^-H`` with
    the smallest eigenvalue and map back with ``u = Q^-H v``.  Velocity never
    enters: the result depends on ``cmats`` alone.
    """
    c0 = 0.5 * (cmats.c0 + cmats.c0.conj().T)
    c2 = 0.5 * (cmats.c2 + cmats.c2.conj().T)
    q = _c0_factor(c0)
    tri = np.allclose(np.triu(q, 1), 0.0)
    if tri:
        left = linalg.solve_triangular(q, c2, lower=True)
        whitened = linalg.solve_triangular(q, left.conj().T, lower=True).conj().T
    else:
        q_inv = np.linalg.inv(q)
        whitened = q_inv @ c2 @ q_inv.conj().T
    whitened = 0.5 * (whitened + whitened.conj().T)
    evals, vecs = np.linalg.eigh(whitened)
    gamma = vecs[:, 0]
    if tri:
        u = linalg.solve_triangular(q.conj().T, gamma, lower=False)
    else:
        u = np.linalg.solve(q.conj().T, gamma)

    # pin the phase: largest-modulus entry becomes real positive
    u = u * np.exp(-1j * np.angle(u[np.argmax(np.abs(u))]))
    real_valued = bool(np.max(np.abs(u.imag)) <= 1e-8 * np.max(np.abs(u)))
    if real_valued:
        u = u.real.astype(complex)
    else:
        warnings.warn("optimal weights are complex (asymmetric window)", stacklevel=2)

    if normalization == "max_one":
        u = u / np.max(np.abs(u))
    elif normalization == "unit_c0":
        u = u / math.sqrt(_quadratic(c0, u))
    else:
        raise DomainError(f"unknown normalization {normalization!r}")
    return WeightVector(u, normalization, float(evals[0]), real_valued)


# -- side-to-main ratio -----------------------------------------------------

def _lobe_edge(vals: np.ndarray, env: np.ndarray, start: int, step: int, peak: float) -> int:
    i = start
    n = vals.size
    while 0 < i + step < n and 0 <= i + step:
        j = i + step
        if env is not None and np.sign(env[j]) != np.sign(env[i]) and env[i] != 0:
            return j if abs(env[j]) < abs(env[i]) else i
        if env is None and 0 < j < n - 1 and vals[j] <= vals[j - 1] and vals[j] <= vals[j + 1] \
                and vals[j] < peak / 100:
            return j
        i = j
    return -1


def smr(geom: ArrayGeometry, weights, grid) -> float:
    """Side-to-main ratio: mean beam function outside the main lobe over its peak.

    The main lobe is bounded by the first sign change of the real envelope
    on each side of ``x = 0``; patterns without a real envelope use the first
    local minimum below 1% of the peak instead.
    """
    x = np.asarray(grid, dtype=float)
    if x.size < 3 or np.any(np.diff(x) <= 0):
        raise DomainError("grid must be increasing with at least three points")
    u = _check_weights(geom, weights)
    vals = np.asarray(beam_function(geom, x, u))
    peak = float(vals.max())

    # strip the linear phase of the weighted array centre to expose a real envelope
    centre = float(np.sum(np.abs(u) * geom.displacements) / np.sum(np.abs(u)))
    af = np.exp(-2j * np.pi * np.multiply.outer(x - 0, geom.displacements - centre)) @ u / geom.m
    env = af.real if np.max(np.abs(af.imag)) <= 1e-9 * np.max(np.abs(af)) else None

    i0 = int(np.argmin(np.abs(x)))
    right = _lobe_edge(vals, env, i0, 1, peak)
    left = _lobe_edge(vals, env, i0, -1, peak)
    if right < 0 or left < 0:
        raise DomainError("no main-lobe null found on the grid")
    side = np.concatenate([vals[:left], vals[right + 1:]])
    if side.size == 0:
        raise DomainError("grid has no points outside the main lobe")
    return float(side.mean() / peak)
