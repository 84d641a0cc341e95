import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pytest import approx
from scipy import integrate

from dopplerspread.array import AodRegion, ArrayGeometry, make_bank
from dopplerspread.errors import DimensionError, DomainError, NumericError
from dopplerspread.spectrum import WindowFunction, beam_function, discrete_window, window_eval
from dopplerspread.weighting import (CMatrices, assemble_c_matrices, doppler_spread, doppler_spread_from_matrices,
                                     optimal_weights, smr)

from reference_data import REFERENCE_WEIGHTS

JAKES = AodRegion.jakes()
EQUICOS_J = WindowFunction("equicos_jakes", JAKES)


def cmats_for(m, spacing=0.45, win=EQUICOS_J):
    g = ArrayGeometry.ula(m, spacing)
    return g, assemble_c_matrices(g, win.region, win)


def c_entry_oracle(win, offset, k):
    """Adaptive QUADPACK on each half, split where the window is singular or kinked."""
    mu = win.mu
    om = 2 * math.pi * offset

    def part(trig):
        f = lambda x: x ** k * float(window_eval(win, x)) * trig(om * x)
        return sum(integrate.quad(f, a, b, limit=400, epsabs=1e-13)[0] for a, b in ((-mu, 0.0), (0.0, mu)))

    return complex(part(math.cos), part(math.sin))


def spread_oracle(geom, win, omega_d, u=None):
    """Second moment of the PSD by direct quadrature of beam function times window."""
    mu = win.mu

    def moment(k):
        f = lambda x: x ** k * float(beam_function(geom, x, u)) * float(window_eval(win, x))
        return sum(integrate.quad(f, a, b, limit=800, epsabs=1e-14, epsrel=1e-12)[0]
                   for a, b in ((-mu, 0.0), (0.0, mu)))

    return omega_d * math.sqrt(moment(2) / moment(0))


# -- C-matrix assembly ----------------------------------------------------------

def test_single_element():
    g = ArrayGeometry([0.0])
    c = assemble_c_matrices(g, JAKES, EQUICOS_J)
    assert c.m == 1
    assert c.c0[0, 0].real == approx(2 * math.pi, rel=1e-12)
    assert c.c2[0, 0].real > 0
    assert c.c2[0, 0].real == approx(c_entry_oracle(EQUICOS_J, 0.0, 2), rel=1e-10)


def test_c0_diagonal_is_window_mass():
    _, c = cmats_for(8)
    assert np.real(np.diag(c.c0)) == approx(np.full(8, 2 * math.pi), rel=1e-12)


@pytest.mark.parametrize("win", [EQUICOS_J, WindowFunction("equiangle_jakes", JAKES),
                                 WindowFunction("equicos", AodRegion(0.0, 2 * math.pi / 3)),
                                 WindowFunction("equiangle", AodRegion(0.4, 1.9))])
def test_entries_vs_quadpack(win):
    g = ArrayGeometry([0.0, 0.45, 1.3, 2.2])
    c = assemble_c_matrices(g, win.region, win)
    for r, s in [(0, 0), (1, 0), (0, 2), (3, 1), (3, 0)]:
        off = g.displacements[r] - g.displacements[s]
        assert c.c0[r, s] == approx(c_entry_oracle(win, off, 0), abs=1e-9)
        assert c.c2[r, s] == approx(c_entry_oracle(win, off, 2), abs=1e-9)


@pytest.mark.parametrize("win", [EQUICOS_J, WindowFunction("equiangle_jakes", JAKES),
                                 WindowFunction("equicos", AodRegion(0.2, 2.0)),
                                 WindowFunction("equicos", AodRegion(0.3, math.pi - 0.3))])
def test_structure(win):
    g = ArrayGeometry.ula(12, 0.45)
    c = assemble_c_matrices(g, win.region, win)
    for mat in (c.c0, c.c2):
        assert np.allclose(mat, mat.conj().T, atol=1e-10)
        assert np.allclose(mat[1:, 1:], mat[:-1, :-1], atol=1e-14)
        ev = np.linalg.eigvalsh(mat)
        assert ev[0] >= -1e-9 * np.trace(mat).real / 12
    if win.is_even:
        assert np.max(np.abs(c.c0.imag)) < 1e-10
        assert np.max(np.abs(c.c2.imag)) < 1e-10
    else:
        assert np.max(np.abs(c.c0.imag)) > 1e-3


def test_nonuniform_geometry_dedups_offsets():
    g = ArrayGeometry([0.0, 0.3, 0.6, 1.4])
    c = assemble_c_matrices(g, JAKES, EQUICOS_J)
    assert c.c0[1, 0] == c.c0[2, 1]
    assert c.c0[3, 2] == approx(c_entry_oracle(EQUICOS_J, 0.8, 0), abs=1e-9)


def test_assembly_validation():
    g = ArrayGeometry.ula(3, 0.5)
    with pytest.raises(DomainError):
        assemble_c_matrices(g, AodRegion(0.1, 1.0), EQUICOS_J)


def test_discrete_window_rejected_by_quadrature():
    # finite-bank windows have dense inverse-sqrt singularities the graded rule does not target
    bank = make_bank(JAKES, 5, "equicos", 0)
    with pytest.raises(NumericError, match="worst entry"):
        assemble_c_matrices(ArrayGeometry.ula(4, 0.45), JAKES, discrete_window(bank))


# -- Doppler spread -------------------------------------------------------------------

@pytest.mark.parametrize("m,spacing,win", [
    (16, 0.45, EQUICOS_J),
    (8, 0.3, WindowFunction("equiangle_jakes", JAKES)),
    (5, 0.5, WindowFunction("equicos", AodRegion(0.0, 2 * math.pi / 3))),
])
def test_spread_matches_direct_quadrature(m, spacing, win):
    g, c = cmats_for(m, spacing, win)
    wd = 2 * math.pi * 5000
    assert doppler_spread(g, win.region, win, wd, cmats=c) == approx(spread_oracle(g, win, wd), rel=1e-6)


def test_spread_random_configs_vs_quadrature():
    rng = np.random.default_rng(5)
    for _ in range(4):
        m = int(rng.integers(2, 9))
        spacing = float(rng.uniform(0.15, 0.6))
        tl = float(rng.uniform(0.0, 1.0))
        region = AodRegion(tl, float(rng.uniform(tl + 0.5, math.pi)))
        win = WindowFunction(str(rng.choice(["equicos", "equiangle"])), region)
        g = ArrayGeometry.ula(m, spacing)
        u = rng.uniform(0.2, 1.0, m) * np.exp(1j * rng.uniform(0, 0.3, m))
        assert doppler_spread(g, region, win, 1.0, u) == approx(spread_oracle(g, win, 1.0, u), rel=1e-6)


def test_spread_scaling_and_weight_scale_invariance():
    g, c = cmats_for(16)
    base = doppler_spread(g, JAKES, EQUICOS_J, 1000.0, cmats=c)
    for alpha in (2.0, 5.0):
        assert doppler_spread(g, JAKES, EQUICOS_J, alpha * 1000.0, cmats=c) == approx(alpha * base, rel=1e-12)
    u = np.linspace(0.3, 1.0, 16)
    s = doppler_spread(g, JAKES, EQUICOS_J, 1000.0, u, cmats=c)
    assert doppler_spread(g, JAKES, EQUICOS_J, 1000.0, -3.7 * u, cmats=c) == approx(s, rel=1e-12)
    assert doppler_spread(g, JAKES, EQUICOS_J, 1000.0, np.ones(16), cmats=c) == base


def test_spread_errors():
    g, c = cmats_for(3)
    with pytest.raises(DomainError):
        doppler_spread_from_matrices(c, 1.0, np.zeros(3))
    with pytest.raises(DimensionError):
        doppler_spread(g, JAKES, EQUICOS_J, 1.0, np.ones(4), cmats=c)


def test_spread_decreases_with_array_size():
    spreads = []
    for m in (16, 64, 256):
        g, c = cmats_for(m)
        spreads.append(doppler_spread(g, JAKES, EQUICOS_J, 1.0, cmats=c))
    assert spreads[0] > spreads[1] > spreads[2]


# -- optimal weights --------------------------------------------------------------

@pytest.mark.parametrize("m", [8, 16, 32, 64])
def test_reference_weight_rows(m):
    _, c = cmats_for(m)
    w = optimal_weights(c)
    assert w.real_valued
    assert np.max(np.abs(w.weights - REFERENCE_WEIGHTS[m])) <= 5e-3


@pytest.mark.parametrize("win", [EQUICOS_J, WindowFunction("equiangle_jakes", JAKES),
                                 WindowFunction("equicos", AodRegion(0.5, math.pi - 0.5))])
def test_even_window_weights_real_palindromic(win):
    _, c = cmats_for(12, 0.4, win)
    w = optimal_weights(c)
    u = w.weights
    assert np.max(np.abs(u.imag)) < 1e-8
    assert u.real == approx(u.real[::-1], abs=1e-6)
    assert np.max(np.abs(u)) == approx(1.0)
    assert u[np.argmax(np.abs(u))].real > 0


@pytest.mark.parametrize("m", [4, 16])
def test_generalized_eigen_residual(m):
    g, c = cmats_for(m)
    w = optimal_weights(c)
    u = w.weights
    lam = w.eigenvalue
    resid = np.linalg.norm(c.c2 @ u - lam * (c.c0 @ u))
    assert resid <= 1e-8 * np.linalg.norm(c.c2, 2) * np.linalg.norm(u)
    # the Rayleigh quotient minimum is the spread
    assert 7.0 * math.sqrt(lam) == approx(doppler_spread(g, JAKES, EQUICOS_J, 7.0, u, cmats=c), rel=1e-10)


def test_eigenvalue_is_minimal():
    _, c = cmats_for(10)
    w = optimal_weights(c)
    from scipy.linalg import eigh
    assert w.eigenvalue == approx(eigh(c.c2, c.c0, eigvals_only=True)[0], rel=1e-9)


def test_unit_c0_normalization():
    _, c = cmats_for(8)
    w = optimal_weights(c, "unit_c0")
    u = w.weights
    assert np.real(np.vdot(u, c.c0 @ u)) == approx(1.0, rel=1e-12)
    w1 = optimal_weights(c)
    assert u / np.max(np.abs(u)) == approx(w1.weights, abs=1e-12)
    with pytest.raises(DomainError):
        optimal_weights(c, "sum_one")


def test_degenerate_pencil():
    _, c = cmats_for(6)
    pencil = CMatrices(c.c0, 3.0 * c.c0)
    w = optimal_weights(pencil)
    assert w.eigenvalue == approx(3.0, rel=1e-10)
    resid = np.linalg.norm(pencil.c2 @ w.weights - w.eigenvalue * (pencil.c0 @ w.weights))
    assert resid <= 1e-8 * np.linalg.norm(pencil.c2, 2) * np.linalg.norm(w.weights)
    assert doppler_spread_from_matrices(pencil, 2.0, w.weights) == approx(2.0 * math.sqrt(3.0), rel=1e-10)


def test_singular_c0_suggests_regularization():
    c0 = np.diag([1.0, 1.0, 0.0]).astype(complex)
    with pytest.raises(DomainError, match="eps="):
        optimal_weights(CMatrices(c0, np.eye(3, dtype=complex)))


def test_eigen_square_root_fallback(monkeypatch):
    _, c = cmats_for(6)
    w = optimal_weights(c)

    def fail(_):
        raise np.linalg.LinAlgError("forced")

    monkeypatch.setattr(np.linalg, "cholesky", fail)
    again = optimal_weights(c)
    assert again.weights == approx(w.weights, abs=1e-8)
    assert again.eigenvalue == approx(w.eigenvalue, rel=1e-9)


def test_asymmetric_window_gives_complex_weights():
    win = WindowFunction("equicos", AodRegion(0.0, 2 * math.pi / 3))
    _, c = cmats_for(8, 0.45, win)
    with pytest.warns(UserWarning, match="complex"):
        w = optimal_weights(c)
    assert not w.real_valued
    assert np.max(np.abs(w.weights.imag)) > 1e-6
    assert abs(w.weights[np.argmax(np.abs(w.weights))] - 1.0) < 1e-12


def test_weights_independent_of_velocity():
    g, c = cmats_for(16)
    w = optimal_weights(c)
    for fd in (100.0, 1000.0, 10000.0):
        again = optimal_weights(c)
        assert np.array_equal(again.weights, w.weights)
        wd = 2 * math.pi * fd
        assert doppler_spread(g, JAKES, EQUICOS_J, wd, again.weights, cmats=c) == approx(wd * math.sqrt(w.eigenvalue))


def test_optimal_beats_random_weights():
    g, c = cmats_for(16)
    wd = 2 * math.pi * 5000
    u_hat = optimal_weights(c).weights
    best = doppler_spread(g, JAKES, EQUICOS_J, wd, u_hat, cmats=c)
    assert best <= doppler_spread(g, JAKES, EQUICOS_J, wd, cmats=c)
    rng = np.random.default_rng(2024)
    for _ in range(200):
        u = rng.normal(size=16) + 1j * rng.normal(size=16)
        assert best <= doppler_spread(g, JAKES, EQUICOS_J, wd, u, cmats=c) + 1e-9 * wd


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 10), st.floats(0.1, 0.6), st.integers(0, 2**32 - 1))
def test_optimality_property(m, spacing, seed):
    g, c = cmats_for(m, spacing)
    u_hat = optimal_weights(c).weights
    best = doppler_spread_from_matrices(c, 1.0, u_hat)
    u = np.random.default_rng(seed).normal(size=(m, 2)) @ np.array([1.0, 1j])
    assert best <= doppler_spread_from_matrices(c, 1.0, u) + 1e-9


# -- side-to-main ratio ----------------------------------------------------------

GRID = np.linspace(-2.0, 2.0, 4001)


def test_smr_brackets():
    g, c = cmats_for(16)
    eq = smr(g, None, GRID)
    opt = smr(g, optimal_weights(c).weights, GRID)
    assert 3e-3 <= eq <= 3e-2
    assert 3e-5 <= opt <= 3e-4


def test_smr_equal_weights_uses_dirichlet_nulls():
    g = ArrayGeometry.ula(16, 0.45)
    null = 1.0 / (16 * 0.45)
    vals = np.asarray(beam_function(g, GRID))
    outside = np.abs(GRID) > null + 1e-3
    inside_null = np.abs(np.abs(GRID) - null) <= 1e-3
    expected_lo = vals[outside].mean()
    expected_hi = vals[outside | inside_null].mean()
    # lobe edge sits at a grid point next to the null
    assert min(expected_lo, expected_hi) * 0.999 <= smr(g, None, GRID) <= max(expected_lo, expected_hi) * 1.001


def test_smr_errors():
    with pytest.raises(DomainError):
        smr(ArrayGeometry([0.0]), None, GRID)
    g = ArrayGeometry.ula(4, 0.45)
    with pytest.raises(DomainError):
        smr(g, None, np.linspace(-0.1, 0.1, 11))
    with pytest.raises(DomainError):
        smr(g, None, [0.0, 1.0])
