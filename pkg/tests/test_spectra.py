"""Plane-wave eigensolver: exact cases, an external oracle, counting, volume."""

import math

import numpy as np
import pytest
from scipy.special import mathieu_a, mathieu_b

from torusspec.potentials import FourierPotential, TWO_PI, cosine, zero_potential
from torusspec.spectra import (FLOAT_FMT, PlaneWaveBasis, assemble_hamiltonian,
                               auto_cutoff, count_eigenvalues, cutoff_certificate,
                               eigen_spectrum, eigen_system, truncation_tail_bound,
                               weyl_count_report, weyl_volume, write_spectrum_csv)


def test_basis_enumeration_1d():
    basis = PlaneWaveBasis(1, 3)
    freqs = basis.frequencies()
    assert basis.size == 7
    assert freqs[0, 0] == -3 and freqs[-1, 0] == 3
    assert basis.index()[(2,)] == 5


def test_basis_enumeration_2d_lexicographic():
    basis = PlaneWaveBasis(2, 1)
    freqs = [tuple(k) for k in basis.frequencies()]
    assert basis.size == 9
    assert freqs[0] == (-1, -1) and freqs[-1] == (1, 1)
    assert freqs.index((0, 1)) == 5


def test_free_spectrum_exact():
    spec = eigen_spectrum(assemble_hamiltonian(zero_potential(1), 1.0, 8))
    expect = np.sort([0.5 * k * k for k in range(-8, 9)])
    assert np.max(np.abs(spec.eigenvalues - expect)) < 1e-12


def test_matrix_is_hermitian_and_banded():
    pot = cosine((1,)) + FourierPotential(1, {(2,): 0.3j, (-2,): -0.3j})
    mat = assemble_hamiltonian(pot, 0.5, 12)
    assert mat.hermitian_defect() < 1e-15
    m = mat.matrix
    # entries vanish beyond the potential bandwidth
    for j in range(25):
        for k in range(25):
            if abs(j - k) > 2:
                assert m[j, k] == 0


def test_spectrum_against_mathieu_characteristic_values():
    """Independent check: with V = cos x the 2 pi periodic eigenvalues are
    (hbar^2/8) times the even-order Mathieu characteristic values at
    q = 4/hbar^2 (substitute x = 2v in the eigenvalue equation)."""
    for hbar in (1.0, 0.5):
        q = 4.0 / hbar ** 2
        ref = np.array([mathieu_a(0, q), mathieu_b(2, q), mathieu_a(2, q),
                        mathieu_b(4, q), mathieu_a(4, q)]) * hbar ** 2 / 8.0
        spec = eigen_spectrum(assemble_hamiltonian(cosine((1,)), hbar, 32))
        assert np.max(np.abs(spec.eigenvalues[:5] - ref)) < 1e-12


def test_2d_separable_spectrum_is_sum_of_1d():
    pot1 = cosine((1,))
    pot2 = cosine((1, 0)) + cosine((0, 1))
    s1 = eigen_spectrum(assemble_hamiltonian(pot1, 0.5, 6)).eigenvalues
    s2 = eigen_spectrum(assemble_hamiltonian(pot2, 0.5, 6)).eigenvalues
    sums = np.sort(np.add.outer(s1, s1).reshape(-1))
    assert np.max(np.abs(s2 - sums)) < 1e-10


def test_cutoff_below_bandwidth_rejected():
    pot = cosine((3,))
    with pytest.raises(ValueError):
        assemble_hamiltonian(pot, 1.0, 2)


def test_hbar_range_validated():
    with pytest.raises(ValueError):
        assemble_hamiltonian(zero_potential(1), 0.0, 4)
    with pytest.raises(ValueError):
        assemble_hamiltonian(zero_potential(1), 1.5, 4)


def test_eigen_system_residuals():
    mat = assemble_hamiltonian(cosine((1,)), 0.5, 10)
    spec, vecs = eigen_system(mat)
    k = 3
    r = mat.matrix @ vecs[:, k] - spec.eigenvalues[k] * vecs[:, k]
    assert np.linalg.norm(r) < 1e-10


def test_trusted_energy_and_count_warning():
    spec = eigen_spectrum(assemble_hamiltonian(zero_potential(1), 1.0, 4))
    assert spec.trusted_energy == pytest.approx(25.0 / 4.0)
    with pytest.warns(RuntimeWarning):
        count_eigenvalues(spec, 0.0, 100.0)


def test_count_uses_open_interval():
    spec = eigen_spectrum(assemble_hamiltonian(zero_potential(1), 1.0, 4))
    # eigenvalues: 0, 0.5, 0.5, 2, 2, ...; the edges themselves are excluded
    assert count_eigenvalues(spec, 0.0, 0.5) == 0
    assert count_eigenvalues(spec, -0.1, 0.6) == 3
    assert count_eigenvalues(spec, 0.5, 2.0) == 0


def test_tail_bound_decreases_with_cutoff():
    pot = cosine((1,))
    bounds = [truncation_tail_bound(pot, 0.5, K, 2.0) for K in (8, 16, 32)]
    assert bounds[0] > bounds[1] > bounds[2]
    # integral comparison: sum_{|k|>K} (a k^2 - E)^-2 ~ 2/(3 a^2 K^3)
    assert bounds[2] < 2.0 / (3.0 * 0.125 ** 2 * 32 ** 3) * 1.5


def test_tail_bound_precondition():
    # the window must be resolved: (hbar^2/2) K^2 > E
    with pytest.raises(ValueError):
        truncation_tail_bound(cosine((1,)), 0.1, 4, 2.0)


def test_tail_bound_zero_for_constant_potential():
    pot = FourierPotential(1, {(0,): 5.0})
    assert truncation_tail_bound(pot, 1.0, 8, 2.0) == 0.0


def test_cutoff_certificate_reports():
    cert = cutoff_certificate(cosine((1,)), 2.0, 0.5)
    assert cert.constant > 0
    assert cert.g_cutoff > cert.constant
    assert cert.tail_at_quarter == pytest.approx(
        cert.constant * math.exp(-1.0 / 2.0), rel=1e-12)


def test_auto_cutoff_formula():
    pot = cosine((2,))
    assert auto_cutoff(pot, 0.5, 4.0) == 8
    assert auto_cutoff(pot, 1.0, 0.0) == 4      # never below the floor
    assert auto_cutoff(pot, 1.0, 100.0) == 20


def test_weyl_volume_free_1d_closed_form():
    # slice length 2 sqrt(2E) on each of the 2 pi positions
    vol = weyl_volume(zero_potential(1), 0.0, 2.0)
    assert vol.value == pytest.approx(TWO_PI * 2.0 * math.sqrt(4.0), rel=1e-10)
    assert not vol.empty


def test_weyl_volume_bounds_for_cosine():
    vol = weyl_volume(cosine((1,)), -5.0, 2.0).value
    lo = TWO_PI * 2.0 * math.sqrt(2.0)          # V replaced by its max
    hi = TWO_PI * 2.0 * math.sqrt(6.0)          # V replaced by its min
    assert lo < vol < hi


def test_weyl_volume_free_2d_monte_carlo():
    vol = weyl_volume(zero_potential(2), 0.0, 1.0, samples=200_000, seed=1)
    exact = TWO_PI ** 2 * math.pi * 2.0         # disc of radius sqrt(2E)
    assert abs(vol.value - exact) < 5.0 * max(vol.std_error, 1e-3 * exact)


def test_weyl_volume_empty_window():
    vol = weyl_volume(cosine((1,)), -5.0, -2.0)
    assert vol.empty and vol.value == 0.0


def test_weyl_count_report_scaling():
    rep = weyl_count_report(zero_potential(1), (0.5, 0.25), (0.0, 2.0), 32)
    assert rep.counts[1] > rep.counts[0]
    # boundary lattice defect is O(hbar): at most two shells plus the origin
    for hb, s in zip(rep.hbars, rep.scaled):
        assert abs(s - rep.volume.value) <= 3.0 * TWO_PI * hb
    d = rep.to_dict()
    assert set(d) >= {"window", "hbar", "count", "scaled", "volume"}


def test_spectrum_csv_golden_bytes(tmp_path):
    spec = eigen_spectrum(assemble_hamiltonian(zero_potential(1), 1.0, 1))
    out = tmp_path / "spectrum.csv"
    write_spectrum_csv(out, [spec])
    golden = (
        "hbar,index,eigenvalue\n"
        "1.000000000000e+00,0,0.000000000000e+00\n"
        "1.000000000000e+00,1,5.000000000000e-01\n"
        "1.000000000000e+00,2,5.000000000000e-01\n"
    )
    assert out.read_text() == golden
    assert FLOAT_FMT % 0.5 == "5.000000000000e-01"
