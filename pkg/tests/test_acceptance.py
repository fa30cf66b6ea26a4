"""End-to-end acceptance checks, one test per headline behavior.

Each test prints one ACCEPTANCE n: PASS/FAIL line on the live terminal and
enforces a wall-time cap.  Tolerances are pinned here and nowhere else.
"""

import json
import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from torusspec.cli import main
from torusspec.dynamics import time_one_map
from torusspec.effective import (action_J, action_threshold, cell_problem_solve,
                                 closed_form_table, effective_1d, invariance_check)
from torusspec.isospectral import (bs_reconstruct, make_pair, spectra_compare,
                                   theorem2_check, weyl_first_invariant)
from torusspec.potentials import (FourierPotential, TWO_PI, cosine, save_potential,
                                  sine, zero_potential)
from torusspec.propagation import egorov_scaling
from torusspec.spectra import (PlaneWaveBasis, assemble_hamiltonian, auto_cutoff,
                               eigen_spectrum, weyl_count_report)
from torusspec.symbols import bump_profile, mechanical_symbol, product_symbol
from torusspec.weylquant import (cv_bound, operator_norm, projector_check,
                                 weyl_matrix, wigner_pairing, wigner_transform,
                                 x_derivative_sup_norms)

COS = cosine((1,))
COS2D = cosine((1, 0)) + cosine((0, 1))


@pytest.fixture
def criterion(capsys):
    @contextmanager
    def run(n: int, cap_seconds: float):
        t0 = time.perf_counter()
        try:
            yield
            elapsed = time.perf_counter() - t0
            assert elapsed < cap_seconds, f"criterion {n} took {elapsed:.1f}s"
        except BaseException:
            with capsys.disabled():
                print(f"\nACCEPTANCE {n}: FAIL")
            raise
        with capsys.disabled():
            print(f"\nACCEPTANCE {n}: PASS [{elapsed:.1f}s]")
    return run


def test_criterion_01_free_spectrum_exact(criterion):
    with criterion(1, 1.0):
        spec = eigen_spectrum(assemble_hamiltonian(zero_potential(1), 1.0, 8))
        expect = np.sort([0.5 * k * k for k in range(-8, 9)])
        assert np.max(np.abs(spec.eigenvalues - expect)) <= 1e-12


def test_criterion_02_symmetry_pairs_isospectral(criterion):
    with criterion(2, 30.0):
        asym1 = COS + sine((2,), 0.5)
        asym2 = COS2D + cosine((1, 1), 0.4) + sine((1, 2), 0.3)
        cases = [(asym1, 32, 0.7), (asym2, 8, (0.7, math.pi / 3.0))]
        for pot, K, shift in cases:
            for relation, arg in (("translate", shift), ("reflect", None)):
                pair = make_pair(pot, relation, arg)
                for hb in (1.0, 0.5, 0.1):
                    sa = eigen_spectrum(assemble_hamiltonian(pair.left, hb, K))
                    sb = eigen_spectrum(assemble_hamiltonian(pair.right, hb, K))
                    assert spectra_compare(sa, sb) <= 1e-10


def test_criterion_03_same_effective_hamiltonian(criterion):
    with criterion(3, 300.0):
        pair = make_pair(COS, "translate", math.pi)       # right is -cos x
        rep = theorem2_check(pair, hbars=(1.0, 0.5, 0.1), cutoff=32,
                             p_values=np.arange(-3.0, 3.01, 0.5))
        assert rep.verdict == "consistent"
        assert rep.eff_dist <= 2e-3

        pair2 = make_pair(COS2D, "translate", (math.pi, math.pi))
        grid_pts = [(a, b) for a in (-1.0, 0.0, 1.0) for b in (-1.0, 0.0, 1.0)]
        rep2 = theorem2_check(pair2, hbars=(1.0, 0.5), cutoff=8,
                              p_values=grid_pts, method="cell-problem", grid=64)
        assert rep2.verdict == "consistent"
        assert rep2.eff_dist <= 5e-3


def test_criterion_04_cosine_effective_closed_vs_cell(criterion):
    with criterion(4, 60.0):
        H = mechanical_symbol(COS)
        for p in (0.0, 1.0, 1.5, 2.0, 3.0):
            closed = effective_1d(COS, p)
            cell = cell_problem_solve(H, p, 8192).value
            assert abs(cell - closed) <= 2e-3
            if p in (0.0, 1.0):
                assert abs(cell - 1.0) <= 2e-3
        # plateau half-width: the computed threshold, plus a bracketing
        # measurement from the solver on either side of it
        assert abs(action_threshold(COS) - 4.0 / math.pi) <= 1e-2
        inside = cell_problem_solve(H, 1.2, 2048).value
        outside = cell_problem_solve(H, 1.35, 2048).value
        assert abs(inside - 1.0) <= 5e-3
        assert outside - 1.0 >= 5e-2


def test_criterion_05_two_dimensional_separability(criterion):
    with criterion(5, 180.0):
        H2 = mechanical_symbol(COS2D)
        cache = {}
        for a in (1.5, 2.0, 2.5):
            for b in (1.5, 2.0, 2.5):
                key = tuple(sorted((a, b)))
                if key not in cache:
                    cache[key] = cell_problem_solve(H2, key, 128).value
                split = effective_1d(COS, a) + effective_1d(COS, b)
                assert abs(cache[key] - split) <= 5e-3


def test_criterion_06_table_certificates(criterion):
    with criterion(6, 60.0):
        tables = [
            closed_form_table(COS, 3.0, 0.25),
            closed_form_table(zero_potential(1), 2.0, 0.5),
            closed_form_table(COS + sine((2,), 0.5), 2.0, 0.25),
        ]
        for table in tables:
            certs = table.certificates
            assert certs.convex
            assert certs.convex_defect <= 1e-6
            assert certs.even_defect <= 1e-6
            assert certs.bound_defect <= 1e-6
            pts = table.points()
            upper = 0.5 * np.sum(pts ** 2, axis=1) + table.v_max
            flat = table.values.reshape(-1)
            assert np.all(flat >= table.v_max - 1e-6)
            assert np.all(flat <= upper + 1e-6)


def test_criterion_07_weyl_counting_rate(criterion):
    with criterion(7, 60.0):
        hbars = (0.2, 0.1, 0.05, 0.025)
        rule = lambda hb: auto_cutoff(COS, hb, 2.0)   # noqa: E731
        rep = weyl_count_report(COS, hbars, (-2.0, 2.0), rule)
        vol = rep.volume.value
        assert abs(vol - 2.0 * TWO_PI * action_J(COS, 2.0)) <= 1e-6
        for hb, s in zip(rep.hbars, rep.scaled):
            assert abs(s - vol) <= 20.0 * hb
        spectra = [eigen_spectrum(assemble_hamiltonian(COS, hb, rule(hb)))
                   for hb in hbars]
        inv = weyl_first_invariant(spectra, 2.0)
        assert abs(inv.value - action_J(COS, 2.0)) <= 5e-2


def test_criterion_08_quantized_flow_scaling(criterion):
    with criterion(8, 300.0):
        a = product_symbol(COS, bump_profile(0.9, 1.2))
        free = egorov_scaling(a, zero_potential(1), 1.0, (0.2, 0.1))
        assert free.exact and max(free.residuals) <= 1e-8
        rep = egorov_scaling(a, COS, 1.0, (0.2, 0.1, 0.05, 0.025))
        assert not rep.exact
        assert all(x > y for x, y in zip(rep.residuals, rep.residuals[1:]))
        assert 0.8 <= rep.slope <= 1.5


def test_criterion_09_doublet_reconstruction(criterion):
    with criterion(9, 60.0):
        free = bs_reconstruct(
            eigen_spectrum(assemble_hamiltonian(zero_potential(1), 0.5, 20)),
            zero_potential(1))
        assert max(free.misfits) <= 1e-10
        m = {}
        for hb, K in ((0.1, 57), (0.05, 114)):
            rec = bs_reconstruct(
                eigen_spectrum(assemble_hamiltonian(COS, hb, K)), COS)
            m[hb] = rec.max_misfit((1.5, 3.0))
        assert m[0.1] / m[0.05] >= 3.0


def test_criterion_10_symplectic_invariance(criterion):
    with criterion(10, 120.0):
        H = mechanical_symbol(COS)
        gen = FourierPotential(1, {(1,): -0.05j, (-1,): 0.05j})   # 0.1 sin x
        phi = time_one_map(product_symbol(gen, bump_profile(3.0, 6.0)), 1e-2)
        rep = invariance_check(H, phi, p_values=(0.0, 1.0, 2.0), grid=2048,
                               defect_probes=16)
        assert rep.symplectic_defect <= 1e-4
        assert rep.max_distance <= 1e-2
        assert abs(rep.base_values[2] - effective_1d(COS, 2.0)) <= 1e-3


def test_criterion_11_quantization_identities(criterion):
    with criterion(11, 60.0):
        basis8 = PlaneWaveBasis(1, 8)
        rng = np.random.default_rng(17)
        for i in range(20):
            hb = 1.0 if i % 2 else 0.5
            phi = rng.standard_normal(basis8.size) + 1j * rng.standard_normal(basis8.size)
            psi = rng.standard_normal(basis8.size) + 1j * rng.standard_normal(basis8.size)
            phi /= np.linalg.norm(phi)
            psi /= np.linalg.norm(psi)
            assert projector_check(phi, psi, basis8, hb) <= 1e-9

        basis6 = PlaneWaveBasis(1, 6)
        H = mechanical_symbol(COS)
        mat = weyl_matrix(H, 0.5, 6).matrix
        for _ in range(50):
            psi = rng.standard_normal(basis6.size) + 1j * rng.standard_normal(basis6.size)
            psi /= np.linalg.norm(psi)
            table = wigner_transform(psi, basis6, 0.5)
            quad = float(np.real(np.vdot(psi, mat @ psi)))
            assert abs(wigner_pairing(H, table) - quad) <= 1e-8

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


def test_criterion_12_deterministic_artifacts(criterion, tmp_path):
    with criterion(12, 60.0):
        pot_path = tmp_path / "cos.json"
        save_potential(COS, pot_path)
        results = []
        for name in ("one", "two"):
            base = tmp_path / name
            assert main(["spectrum", "--potential", str(pot_path),
                         "--hbar", "0.5,0.25", "--K", "16",
                         "--out", str(base / "spec")]) == 0
            assert main(["effective", "--potential", str(pot_path),
                         "--method", "closed-form", "--pmax", "2", "--dp", "0.5",
                         "--out", str(base / "eff")]) == 0
            assert main(["bs-reconstruct", "--potential", str(pot_path),
                         "--hbar", "0.1", "--K", "57",
                         "--out", str(base / "bs")]) == 0
            results.append({
                "spectrum": (base / "spec" / "spectrum.csv").read_bytes(),
                "effective": (base / "eff" / "effective.csv").read_bytes(),
                "bs": (base / "bs" / "bs.csv").read_bytes(),
                "hashes": json.loads((base / "spec" / "manifest.json").read_text())["outputs"],
            })
        assert results[0] == results[1]
