"""Midpoint quantization, Wigner duality, and the uniform norm bound."""

import math

import numpy as np
import pytest

from torusspec.potentials import FourierPotential, TWO_PI, cosine
from torusspec.spectra import PlaneWaveBasis, assemble_hamiltonian
from torusspec.symbols import (PhaseSpaceFunction, bump_profile,
                               mechanical_symbol, product_symbol)
from torusspec.weylquant import (cv_bound, cv_derivative_order, operator_norm,
                                 projector_check, symbol_from_wigner,
                                 weyl_matrix, wigner_pairing, wigner_transform,
                                 x_derivative_sup_norms)


def test_mechanical_symbol_quantizes_to_schrodinger_matrix():
    pot = cosine((1,)) + cosine((2,)) * 0.3
    a = weyl_matrix(mechanical_symbol(pot), 0.5, 8).matrix
    b = assemble_hamiltonian(pot, 0.5, 8).matrix
    assert np.max(np.abs(a - b)) == 0.0


def test_numeric_fft_path_matches_closed_form():
    prof = lambda eta: np.exp(-0.5 * np.sum(eta ** 2, axis=-1))
    closed = product_symbol(cosine((1,)), prof)
    # same evaluator with the Fourier data stripped forces the FFT path
    numeric = PhaseSpaceFunction(dim=1, fn=closed.fn)
    a = weyl_matrix(closed, 0.5, 6).matrix
    b = weyl_matrix(numeric, 0.5, 6).matrix
    assert np.max(np.abs(a - b)) < 1e-12


def test_midpoint_rule_entries_first_principles():
    # b = cos(x) eta: the (j, m) entry must be 0.5 * hbar (j + m) / 2
    hbar = 0.8
    b = product_symbol(cosine((1,)), lambda eta: eta[:, 0])
    mat = weyl_matrix(b, hbar, 4).matrix
    idx = PlaneWaveBasis(1, 4).index()
    for j, m in [(1, 0), (0, 1), (3, 2), (-2, -1), (4, 3)]:
        expect = 0.5 * hbar * (j + m) / 2.0
        assert mat[idx[(j,)], idx[(m,)]] == pytest.approx(expect, abs=1e-14)
    assert np.max(np.abs(np.diag(mat))) == 0.0
    assert np.max(np.abs(mat - mat.conj().T)) < 1e-14


def test_wigner_of_basis_state_is_lattice_delta():
    basis = PlaneWaveBasis(1, 4)
    psi = np.zeros(basis.size, dtype=complex)
    psi[basis.index()[(2,)]] = 1.0
    table = wigner_transform(psi, basis, 0.5)
    kap_row = {tuple(k): i for i, k in enumerate(table.kappas)}
    row = table.values[kap_row[(4,)]]
    assert np.max(np.abs(row - 1.0 / TWO_PI)) < 1e-14
    others = np.delete(table.values, kap_row[(4,)], axis=0)
    assert np.max(np.abs(others)) < 1e-14
    assert table.momenta()[kap_row[(4,)], 0] == pytest.approx(1.0)
    assert table.norm_sum() == pytest.approx(1.0, abs=1e-12)


def test_wigner_superposition_interference_term():
    basis = PlaneWaveBasis(1, 2)
    psi = np.zeros(basis.size, dtype=complex)
    psi[basis.index()[(0,)]] = 1.0 / math.sqrt(2.0)
    psi[basis.index()[(1,)]] = 1.0 / math.sqrt(2.0)
    table = wigner_transform(psi, basis, 1.0)
    kap_row = {tuple(k): i for i, k in enumerate(table.kappas)}
    # the half-integer momentum row carries the cos x interference fringe
    fringe = table.values[kap_row[(1,)]]
    assert np.max(np.abs(fringe - np.cos(table.x_axis()) / TWO_PI)) < 1e-12
    assert table.norm_sum() == pytest.approx(1.0, abs=1e-12)


def test_wigner_validation():
    basis = PlaneWaveBasis(1, 3)
    psi = np.zeros(basis.size, dtype=complex)
    psi[0] = 1.0
    with pytest.raises(ValueError):
        wigner_transform(psi * 1.01, basis, 0.5)
    with pytest.raises(ValueError):
        wigner_transform(psi[:-1], basis, 0.5)
    with pytest.raises(ValueError):
        wigner_transform(psi, basis, 0.5, res=4 * 3)


def test_pairing_equals_quadratic_form():
    basis = PlaneWaveBasis(1, 6)
    hbar = 0.5
    H = mechanical_symbol(cosine((1,)))
    mat = weyl_matrix(H, hbar, 6).matrix
    rng = np.random.default_rng(11)
    for _ in range(10):
        psi = rng.standard_normal(basis.size) + 1j * rng.standard_normal(basis.size)
        psi /= np.linalg.norm(psi)
        table = wigner_transform(psi, basis, hbar)
        quad = float(np.real(np.vdot(psi, mat @ psi)))
        assert wigner_pairing(H, table) == pytest.approx(quad, abs=1e-8)


def test_projector_identity():
    basis = PlaneWaveBasis(1, 6)
    rng = np.random.default_rng(5)
    for hbar in (1.0, 0.5):
        for _ in range(5):
            phi = rng.standard_normal(basis.size) + 1j * rng.standard_normal(basis.size)
            psi = rng.standard_normal(basis.size) + 1j * rng.standard_normal(basis.size)
            phi /= np.linalg.norm(phi)
            psi /= np.linalg.norm(psi)
            assert projector_check(phi, psi, basis, hbar) < 1e-9


def test_symbol_from_wigner_lattice_support():
    basis = PlaneWaveBasis(1, 4)
    psi = np.zeros(basis.size, dtype=complex)
    psi[basis.index()[(2,)]] = 1.0
    sym = symbol_from_wigner(wigner_transform(psi, basis, 0.5))
    xs = np.linspace(0.0, TWO_PI, 7)
    on = np.full(7, 0.5 * 2.0)          # eta = hbar k, on the half-lattice
    off = np.full(7, 0.33)
    assert np.max(np.abs(sym.fn(xs, on) - 1.0 / TWO_PI)) < 1e-10
    assert np.max(np.abs(sym.fn(xs, off))) == 0.0


def test_cv_bound_dominates_operator_norm():
    rng = np.random.default_rng(23)
    prof = bump_profile(1.0, 2.0)
    for _ in range(10):
        coeffs = {(0,): float(rng.uniform(-1, 1))}
        for q in (1, 2, 3):
            c = complex(rng.uniform(-1, 1), rng.uniform(-1, 1))
            coeffs[(q,)] = c
            coeffs[(-q,)] = c.conjugate()
        pot = FourierPotential(1, coeffs)
        bound = cv_bound(x_derivative_sup_norms(pot, 4), 1)
        norm = operator_norm(weyl_matrix(product_symbol(pot, prof), 0.5, 8).matrix)
        assert norm <= bound + 1e-9


def test_cv_bound_requires_all_orders():
    with pytest.raises(ValueError):
        cv_bound({(0,): 1.0}, 1)


def test_cv_derivative_order_by_dimension():
    assert cv_derivative_order(1) == 2
    assert cv_derivative_order(2) == 2
    assert cv_derivative_order(3) == 3
    assert cv_derivative_order(4) == 3


def test_weyl_matrix_validation():
    with pytest.raises(ValueError):
        weyl_matrix(mechanical_symbol(cosine((1,))), 0.0, 8)
    with pytest.raises(ValueError):
        weyl_matrix(mechanical_symbol(cosine((3,))), 0.5, 2)


def test_operator_norm_on_known_matrix():
    assert operator_norm(np.diag([1.0, -3.0, 2.0])) == pytest.approx(3.0, abs=1e-9)
