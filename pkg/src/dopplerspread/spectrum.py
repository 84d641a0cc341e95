"""Analytic channel PSD as the product of a beam function and a window function.

The PSD of the Doppler-compensated uplink at normalized Doppler frequency
``x = omega / omega_d`` is ``|G(x)|^2 W(x) / omega_d``.  ``|G|^2`` depends
only on the array (and optional antenna weights); ``W`` depends only on the
AoD region and on where the beams point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .array import AodRegion, ArrayGeometry, BeamformerBank, _check_weights
from .errors import DomainError

VARIANTS = ("discrete", "equicos", "equicos_jakes", "equiangle", "equiangle_jakes")
_JAKES_VARIANTS = ("equicos_jakes", "equiangle_jakes")


# -- complete elliptic integral of the first kind ---------------------------

def _agm(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    for _ in range(64):
        a, b = 0.5 * (a + b), np.sqrt(a * b)
        if np.all(np.abs(a - b) <= 4e-16 * a):
            break
    return 0.5 * (a + b)


def ellipk_from_complement(kp):
    """``K`` as a function of the complementary modulus ``kp = sqrt(1 - k^2)``.

    Passing ``kp`` directly keeps full precision when ``k`` is within rounding
    distance of 1.  ``kp == 0`` gives ``inf``.
    """
    kp = np.asarray(kp, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(kp > 0, np.pi / (2.0 * _agm(1.0, np.where(kp > 0, kp, 1.0))), np.inf)
    return out if out.ndim else float(out)


def elliptic_f_complete(k: float) -> float:
    """Complete elliptic integral of the first kind ``F(pi/2, k)``, modulus ``k``.

    Evaluated with the arithmetic-geometric mean ``K = pi / (2 AGM(1, k'))``.
    """
    k = float(k)
    if not (0.0 <= k < 1.0):
        raise DomainError(f"modulus must satisfy 0 <= k < 1, got {k}")
    return float(ellipk_from_complement(math.sqrt((1.0 - k) * (1.0 + k))))


# -- beam function ----------------------------------------------------------

def beam_function(geom: ArrayGeometry, omega_tilde, weights=None):
    """``|(1/M) sum_r u_r exp(-j 2 pi d_r x)|^2`` evaluated at ``x = omega_tilde``."""
    u = _check_weights(geom, weights)
    x = np.asarray(omega_tilde, dtype=float)
    phase = np.exp(-2j * np.pi * np.multiply.outer(x, geom.displacements))
    out = np.abs(phase @ u / geom.m) ** 2
    return out if out.ndim else float(out)


def ula_beam_function(m: int, spacing: float, omega_tilde):
    """Closed form ``sin^2(chi M x) / (M^2 sin^2(chi x))`` of the equal-weight ULA beam function."""
    x = np.asarray(omega_tilde, dtype=float)
    # reduce d x to the nearest alias so numerator and denominator share one rounded argument
    t = spacing * x
    e = math.pi * (t - np.round(t))
    s = np.sin(e)
    near = np.abs(s) < 1e-8
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.sin(m * e) ** 2 / (m * m * s * s)
    # removable singularity at e = 0
    series = 1.0 - (m * m - 1.0) * e * e / 3.0
    out = np.where(near, series, val)
    return out if out.ndim else float(out)


# -- window functions -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class WindowFunction:
    """A window ``W(x)`` determined by the AoD region and beam layout.

    ``variant`` is one of

    * ``"discrete"`` - finite bank sum (requires ``bank``); ``pas`` optionally
      replaces the uniform power angle spectrum (unvalidated extension hook)
    * ``"equicos"`` - closed form for equally spaced cosines, any region
    * ``"equicos_jakes"`` - ``arccos(|x| - 1)``, Jakes region only
    * ``"equiangle"`` - integral form for equally spaced angles, any region
    * ``"equiangle_jakes"`` - elliptic-integral form, Jakes region only
    """

    variant: str
    region: AodRegion
    bank: Optional[BeamformerBank] = None
    pas: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise DomainError(f"unknown window variant {self.variant!r}")
        if self.variant == "discrete" and self.bank is None:
            raise DomainError("a discrete window needs a beamformer bank")
        if self.variant in _JAKES_VARIANTS and not self.region.is_jakes:
            raise DomainError(f"{self.variant} is only defined on the Jakes region (0, pi)")

    @property
    def mu(self) -> float:
        return self.region.mu

    @property
    def is_even(self) -> bool:
        """True when ``W(-x) == W(x)`` by symmetry of region and beam layout."""
        r = self.region
        symmetric_region = abs(r.theta_l + r.theta_r - math.pi) < 1e-12
        if self.variant != "discrete":
            return symmetric_region
        c = np.sort(self.bank.cosines)
        return symmetric_region and self.pas is None and np.allclose(c, -c[::-1], atol=1e-12)

    def __call__(self, omega_tilde):
        return window_eval(self, omega_tilde)


def closed_form_window(region: AodRegion, layout: str) -> WindowFunction:
    """The large-``Q`` window for a layout, using the Jakes form when it applies."""
    if layout == "equicos":
        return WindowFunction("equicos_jakes" if region.is_jakes else "equicos", region)
    if layout == "equiangle":
        return WindowFunction("equiangle_jakes" if region.is_jakes else "equiangle", region)
    raise DomainError(f"no closed-form window for layout {layout!r}")


def discrete_window(bank: BeamformerBank, pas=None) -> WindowFunction:
    return WindowFunction("discrete", bank.region, bank=bank, pas=pas)


def contributing_set(region: AodRegion, bank: BeamformerBank, omega_tilde: float) -> frozenset:
    """Indices of the branches whose beams contribute to the PSD at ``omega_tilde``."""
    x = float(omega_tilde)
    if abs(x) > region.mu:
        return frozenset()
    cl, cr = math.cos(region.theta_l), math.cos(region.theta_r)
    c = bank.cosines
    if x < 0:
        hit = (cr <= c) & (c <= x + cl)
    else:
        hit = (x + cr <= c) & (c <= cl)
    return frozenset(int(i) for i in np.flatnonzero(hit))


def _discrete(win: WindowFunction, x: np.ndarray) -> np.ndarray:
    region, bank = win.region, win.bank
    cl, cr = math.cos(region.theta_l), math.cos(region.theta_r)
    c = bank.cosines
    xs = x[:, None]
    hit = (xs + cr <= c) & (c <= xs + cl) & (cr <= c) & (c <= cl)
    arg = 1.0 - (xs - c) ** 2
    with np.errstate(divide="ignore"):
        term = np.where(hit, 1.0 / np.sqrt(np.maximum(arg, 0.0)), 0.0)
    if win.pas is not None:
        theta = np.arccos(np.clip(c - xs, -1.0, 1.0))
        term = term * np.where(hit, np.asarray(win.pas(theta), dtype=float) * region.width, 0.0)
    return 2.0 * np.pi / (region.width * bank.q) * term.sum(axis=1)


def _equicos(region: AodRegion, x: np.ndarray) -> np.ndarray:
    cl, cr = math.cos(region.theta_l), math.cos(region.theta_r)
    scale = 2.0 * np.pi / (region.width * region.mu)
    neg = np.arccos(np.clip(cr - x, -1.0, 1.0)) - region.theta_l
    pos = region.theta_r - np.arccos(np.clip(cl - x, -1.0, 1.0))
    # both branches vanish at x = -+mu; clip the rounding residue there
    return scale * np.maximum(np.where(x < 0, neg, pos), 0.0)


def _equiangle_point(region: AodRegion, w: float) -> float:
    width = region.mu - abs(w)
    if width <= 0:
        return 0.0
    # 1 - cos(theta_l) and 1 + cos(theta_r) without cancellation
    ul = 2.0 * math.sin(0.5 * region.theta_l) ** 2
    ur = 0.0 if region.theta_r == math.pi else 2.0 * math.cos(0.5 * region.theta_r) ** 2
    # constant parts of the four factors of (1-x^2)(1-(x-w)^2) on the admissible x-range:
    # k1, k3 multiply the distance to the upper end, k2, k4 the distance to the lower end
    if w >= 0:
        k1, k3, k2, k4 = ul, ul + w, ur + w, ur
    else:
        k1, k3, k2, k4 = ul - w, ul, ur, ur - w
    if (k1 == 0.0 and k3 == 0.0) or (k2 == 0.0 and k4 == 0.0):
        return math.inf
    h = 0.5 * width

    def half(p: float, q: float, k_far: float, l_far: float) -> float:
        # r = distance to this end, r in [0, h].  With s = 2 ln((sqrt(p+r) + sqrt(q+r)) / y0),
        # ds = dr / sqrt((p+r)(q+r)), which absorbs the near-singular pair exactly
        rp, rq = math.sqrt(p), math.sqrt(q)
        y0 = rp + rq

        def f(s_val):
            e = math.expm1(0.5 * s_val)
            # sqrt(p+r) - sqrt(p), free of cancellation
            dp = e * (2.0 * rq + y0 * e) / (2.0 * (1.0 + e))
            far = 2.0 * h - min(dp * (dp + 2.0 * rp), h)
            return 1.0 / math.sqrt((k_far + far) * (l_far + far))

        grow = h / (math.sqrt(p + h) + rp) + h / (math.sqrt(q + h) + rq)
        s1 = 2.0 * math.log1p(grow / y0)
        val, _ = integrate.quad(f, 0.0, s1, epsabs=1e-12, epsrel=1e-11, limit=200)
        return val

    val = half(k1, k3, k2, k4) + half(k2, k4, k1, k3)
    return 2.0 * math.pi / region.width ** 2 * val


def window_eval(win: WindowFunction, omega_tilde):
    """Evaluate ``W`` at one point or an array of points; ``0`` outside ``|x| <= mu``.

    The Jakes equi-angle window is unbounded at ``x = 0`` and reports ``inf`` there.
    """
    x = np.asarray(omega_tilde, dtype=float)
    flat = x.reshape(-1)
    inside = np.abs(flat) <= win.mu
    out = np.zeros(flat.shape)
    xi = flat[inside]
    v = win.variant
    if v == "discrete":
        out[inside] = _discrete(win, xi)
    elif v == "equicos":
        out[inside] = _equicos(win.region, xi)
    elif v == "equicos_jakes":
        out[inside] = np.arccos(np.abs(xi) - 1.0)
    elif v == "equiangle_jakes":
        out[inside] = (2.0 / np.pi) * np.asarray(ellipk_from_complement(np.abs(xi) / 2.0))
    else:
        out[inside] = [_equiangle_point(win.region, float(w)) for w in xi]
    out = out.reshape(x.shape)
    return out if out.ndim else float(out)


# -- PSD --------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PsdCurve:
    """PSD samples on an increasing normalized-frequency grid.

    ``excluded`` lists grid points dropped because the PSD is infinite there.
    """

    omega_tilde: np.ndarray
    values: np.ndarray
    omega_d: float
    excluded: tuple = ()

    def __post_init__(self):
        g = np.asarray(self.omega_tilde, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.shape != v.shape:
            raise DomainError("grid and values differ in length")
        if np.any(np.diff(g) <= 0):
            raise DomainError("PSD grid must be strictly increasing")
        if np.any(v < 0):
            raise DomainError("PSD values must be nonnegative")
        object.__setattr__(self, "omega_tilde", g)
        object.__setattr__(self, "values", v)

    @property
    def omega(self) -> np.ndarray:
        return self.omega_tilde * self.omega_d


def normalized_grid(mu: float, n: int) -> np.ndarray:
    """``n`` cell midpoints over ``[-mu, mu]``; even ``n`` never hits ``x = 0``."""
    return -mu + (np.arange(n) + 0.5) * (2.0 * mu / n)


def psd_analytic(
    geom: ArrayGeometry,
    region: AodRegion,
    win: WindowFunction,
    omega_d: float,
    omega_grid,
    weights=None,
) -> PsdCurve:
    """PSD ``|G(w/omega_d)|^2 W(w/omega_d) / omega_d`` on a grid of Doppler frequencies ``w`` (rad/s)."""
    if not omega_d > 0:
        raise DomainError(f"omega_d must be positive, got {omega_d}")
    if win.region != region:
        raise DomainError("window was built for a different AoD region")
    x = np.asarray(omega_grid, dtype=float) / omega_d
    w = np.asarray(window_eval(win, x), dtype=float).reshape(x.shape)
    finite = np.isfinite(w)
    vals = beam_function(geom, x[finite], weights) * w[finite] / omega_d
    return PsdCurve(x[finite], np.asarray(vals, dtype=float), float(omega_d), tuple(x[~finite].tolist()))
