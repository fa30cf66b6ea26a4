"""Weyl quantization on the torus by the midpoint rule.

In the plane-wave basis the quantization of b(x, eta) has the exact matrix
elements entry(j, m) = b_hat(j - m, hbar (j + m) / 2), with b_hat the
x-Fourier transform at fixed eta.  The Wigner transform of a state lives on
the momentum half-lattice eta = (hbar/2) kappa and pairs with symbols by a
plain sum-integral; both directions of that duality are implemented here so
they can be checked against each other.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ._linalg import operator_norm
from .potentials import TWO_PI, FourierPotential, potential_extrema
from .spectra import PlaneWaveBasis
from .symbols import PhaseSpaceFunction

__all__ = [
    "WeylMatrix", "weyl_matrix", "WignerTable", "wigner_transform",
    "wigner_pairing", "projector_check", "cv_bound", "cv_derivative_order",
    "x_derivative_sup_norms", "symbol_from_wigner", "operator_norm",
]


@dataclass(frozen=True)
class WeylMatrix:
    hbar: float
    basis: PlaneWaveBasis
    matrix: np.ndarray

    def hermitian_defect(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))


def weyl_matrix(b: PhaseSpaceFunction, hbar: float, K: int,
                quad_points: int | None = None) -> WeylMatrix:
    """Quantize b over the box |k|_inf <= K.

    Band-limited symbols with a closed-form x-Fourier transform are filled
    exactly; otherwise the transform is taken by FFT on a periodic grid
    (spectrally accurate for smooth symbols).
    """
    hbar = float(hbar)
    if not (0.0 < hbar <= 1.0):
        raise ValueError("hbar out of range (0, 1]")
    K = int(K)
    if b.x_bandwidth is not None and K < b.x_bandwidth:
        raise ValueError(f"cutoff K={K} below symbol bandwidth {b.x_bandwidth}")
    basis = PlaneWaveBasis(b.dim, K)
    freqs = basis.frequencies()
    size = basis.size
    n = b.dim
    mat = np.zeros((size, size), dtype=complex)

    if b.x_fourier is not None:
        bw = b.x_bandwidth if b.x_bandwidth is not None else 2 * K
        bw = min(bw, 2 * K)
        index = basis.index()
        for q in itertools.product(range(-bw, bw + 1), repeat=n):
            qa = np.array(q, dtype=int)
            m_idx = []
            j_idx = []
            for m, km in enumerate(freqs):
                j = index.get(tuple(km + qa))
                if j is not None:
                    m_idx.append(m)
                    j_idx.append(j)
            if not m_idx:
                continue
            m_idx = np.array(m_idx)
            j_idx = np.array(j_idx)
            eta = hbar * (freqs[m_idx].astype(float) + 0.5 * qa[None, :])
            mat[j_idx, m_idx] = b.x_fourier(q, eta)
        return WeylMatrix(hbar=hbar, basis=basis, matrix=mat)

    # numeric path: FFT in x at every needed lattice momentum
    bw_hint = b.x_bandwidth or 0
    G = int(quad_points or max(4 * K + 4, 4 * bw_hint + 4, 64))
    if G < 4 * K + 1:
        raise ValueError("quadrature grid too coarse to separate frequencies")
    axis = np.arange(G) * (TWO_PI / G)
    xg = np.stack([g.reshape(-1) for g in np.meshgrid(*([axis] * n), indexing="ij")], axis=-1)
    sums = np.array(list(itertools.product(range(-2 * K, 2 * K + 1), repeat=n)), dtype=int)
    S = sums.shape[0]
    P = xg.shape[0]
    vals = np.empty((S, P), dtype=complex)
    for si, s in enumerate(sums):
        eta = np.repeat((0.5 * hbar * s.astype(float))[None, :], P, axis=0)
        vals[si] = b.fn(xg, eta)
    spec = np.fft.fftn(vals.reshape((S,) + (G,) * n), axes=tuple(range(1, n + 1))) / (G ** n)
    spec = spec.reshape(S, -1)

    sum_base = 4 * K + 1
    sum_code = sums + 2 * K
    s_index = {tuple(s): i for i, s in enumerate(sums)}
    del sum_code, sum_base

    jj = freqs[:, None, :] + freqs[None, :, :]
    qq = freqs[:, None, :] - freqs[None, :, :]
    s_flat = np.zeros((size, size), dtype=int)
    q_flat = np.zeros((size, size), dtype=int)
    for axis_i in range(n):
        s_flat = s_flat * (4 * K + 1) + (jj[:, :, axis_i] + 2 * K)
        q_flat = q_flat * G + np.mod(qq[:, :, axis_i], G)
    mat = spec[s_flat, q_flat]
    return WeylMatrix(hbar=hbar, basis=basis, matrix=mat)


# -- Wigner transform ------------------------------------------------------


@dataclass(frozen=True)
class WignerTable:
    """W(x, eta) sampled on a uniform x-grid and the momentum lattice.

    The lattice is eta = (hbar/2) kappa for integer vectors |kappa|_inf
    <= 2K; outside that band the transform of a K-band state vanishes.
    """

    hbar: float
    cutoff: int
    res: int
    kappas: np.ndarray        # (S, n) int
    values: np.ndarray        # (S, res, ..., res) real

    @property
    def dim(self) -> int:
        return self.kappas.shape[1]

    def x_axis(self) -> np.ndarray:
        return np.arange(self.res) * (TWO_PI / self.res)

    def momenta(self) -> np.ndarray:
        return 0.5 * self.hbar * self.kappas.astype(float)

    def norm_sum(self) -> float:
        """sum_eta integral W dx, which must reproduce ||psi||^2."""
        cell = (TWO_PI / self.res) ** self.dim
        return float(np.sum(self.values) * cell)


def wigner_transform(psi: np.ndarray, basis: PlaneWaveBasis, hbar: float,
                     res: int | None = None) -> WignerTable:
    """Wigner transform of a plane-wave state, exact in Fourier space.

    With psi = sum_k c_k e_k the transform at kappa = k + l is
    (2 pi)^(-n) sum_{k+l=kappa} c_k conj(c_l) exp(i (k-l).x).
    """
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (basis.size,):
        raise ValueError("state vector does not match the basis")
    nrm = float(np.linalg.norm(psi))
    if nrm > 1.0 + 1e-12:
        raise ValueError("state norm above 1 + 1e-12 is rejected")
    hbar = float(hbar)
    K = basis.cutoff
    n = basis.dim
    res = int(res or (4 * K + 4))
    if res < 4 * K + 2:
        raise ValueError("resolution too coarse for the 2K spatial band")
    freqs = basis.frequencies()
    index = basis.index()
    axis = np.arange(res) * (TWO_PI / res)
    grids = np.meshgrid(*([axis] * n), indexing="ij")
    pts = np.stack([g.reshape(-1) for g in grids], axis=-1)

    kappas = np.array(list(itertools.product(range(-2 * K, 2 * K + 1), repeat=n)), dtype=int)
    values = np.zeros((kappas.shape[0], pts.shape[0]), dtype=complex)
    pref = (TWO_PI) ** (-n)
    for ki, kap in enumerate(kappas):
        for mk, k in enumerate(freqs):
            l = tuple(kap - k)
            ml = index.get(l)
            if ml is None:
                continue
            c = psi[mk] * np.conj(psi[ml])
            if c == 0:
                continue
            d = k - np.asarray(l)
            values[ki] += c * np.exp(1j * (pts @ d.astype(float)))
    values *= pref
    if values.size and np.max(np.abs(values.imag)) > 1e-10:
        raise ArithmeticError("Wigner values failed to be real")
    shaped = values.real.reshape((kappas.shape[0],) + (res,) * n)
    return WignerTable(hbar=hbar, cutoff=K, res=res, kappas=kappas, values=shaped)


def wigner_pairing(b: PhaseSpaceFunction, table: WignerTable) -> float:
    """sum_eta integral b(x, eta) W(x, eta) dx by trapezoid in x.

    Equals the quadratic form <Op(b) psi, psi> when the grids resolve the
    combined spatial band.
    """
    if b.dim != table.dim:
        raise ValueError("symbol and table dimensions differ")
    n = table.dim
    axis = table.x_axis()
    grids = np.meshgrid(*([axis] * n), indexing="ij")
    pts = np.stack([g.reshape(-1) for g in grids], axis=-1)
    cell = (TWO_PI / table.res) ** n
    total = 0.0 + 0.0j
    momenta = table.momenta()
    for ki in range(table.kappas.shape[0]):
        w = table.values[ki].reshape(-1)
        if not np.any(w):
            continue
        eta = np.repeat(momenta[ki][None, :], pts.shape[0], axis=0)
        total += np.sum(np.asarray(b.fn(pts, eta)) * w) * cell
    if abs(total.imag) > 1e-9 * max(1.0, abs(total.real)):
        raise ArithmeticError("pairing failed to be real")
    return float(total.real)


def symbol_from_wigner(table: WignerTable, scale: float = 1.0) -> PhaseSpaceFunction:
    """Phase-space function backed by a Wigner table (zero off the lattice band)."""
    n = table.dim
    K = table.cutoff
    res = table.res
    hbar = table.hbar
    spec = np.fft.fftn(table.values.astype(complex),
                       axes=tuple(range(1, n + 1))) / (res ** n)
    spec = spec.reshape(table.kappas.shape[0], -1) * float(scale)
    kap_index = {tuple(k): i for i, k in enumerate(table.kappas)}

    def lattice_rows(eta):
        eta = np.asarray(eta, dtype=float)
        if eta.ndim == 1 and n == 1:
            eta = eta[:, None]
        kf = 2.0 * eta / hbar
        kr = np.rint(kf).astype(int)
        on = np.all(np.abs(kf - kr) <= 1e-8, axis=1) & np.all(np.abs(kr) <= 2 * K, axis=1)
        rows = np.full(eta.shape[0], -1, dtype=int)
        for i in np.nonzero(on)[0]:
            rows[i] = kap_index[tuple(kr[i])]
        return rows

    def xf(q, eta):
        rows = lattice_rows(eta)
        out = np.zeros(rows.shape[0], dtype=complex)
        hit = rows >= 0
        if np.any(hit):
            qcode = 0
            for v in q:
                qcode = qcode * res + (int(v) % res)
            out[hit] = spec[rows[hit], qcode]
        return out

    def fn(x, eta):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1 and n == 1:
            x = x[:, None]
        rows = lattice_rows(eta)
        out = np.zeros(x.shape[0], dtype=complex)
        hit = np.nonzero(rows >= 0)[0]
        for q in itertools.product(range(-2 * K, 2 * K + 1), repeat=n):
            qcode = 0
            for v in q:
                qcode = qcode * res + (int(v) % res)
            coeffs = spec[rows[hit], qcode]
            out[hit] += coeffs * np.exp(1j * (x[hit] @ np.asarray(q, dtype=float)))
        return out.real

    return PhaseSpaceFunction(dim=n, fn=fn, x_bandwidth=2 * K, x_fourier=xf)


def projector_check(phi: np.ndarray, psi: np.ndarray, basis: PlaneWaveBasis,
                    hbar: float, res: int | None = None) -> float:
    """|| Op((2 pi)^n W_phi) psi - <phi, psi> phi ||.

    The rank-one projector of a unit state is the quantization of its
    Wigner density once the phase-space volume normalisation (2 pi)^n is
    restored; the return value is the l2 defect of that identity.
    """
    phi = np.asarray(phi, dtype=complex)
    psi = np.asarray(psi, dtype=complex)
    if np.linalg.norm(phi) > 1.0 + 1e-12 or np.linalg.norm(psi) > 1.0 + 1e-12:
        raise ValueError("state norms above 1 + 1e-12 are rejected")
    table = wigner_transform(phi, basis, hbar, res=res)
    sym = symbol_from_wigner(table, scale=TWO_PI ** basis.dim)
    # the Wigner symbol is 2K-band in x, so quantize over the doubled box and
    # keep the block between the original modes; entries only depend on the
    # mode pair, not on the box
    big = weyl_matrix(sym, hbar, 2 * basis.cutoff)
    big_index = big.basis.index()
    keep = np.array([big_index[tuple(k)] for k in basis.frequencies()])
    lhs = big.matrix[np.ix_(keep, keep)] @ psi
    rhs = np.vdot(phi, psi) * phi
    return float(np.linalg.norm(lhs - rhs))


# -- uniform operator-norm bound ------------------------------------------


def cv_derivative_order(dim: int) -> int:
    """Highest x-derivative order entering the norm bound is twice this."""
    if dim % 2 == 0:
        return dim // 2 + 1
    return (dim + 1) // 2 + 1


def cv_bound(sup_norms: dict, dim: int) -> float:
    """Uniform bound on ||Op(b)|| from x-derivative sup-norms.

    Requires every multi-index with |alpha| <= 2M, M = cv_derivative_order:
    bound = 2^(n+1)/(n+2) * pi^((3n-1)/2) / Gamma((n+1)/2) * sum ||d^a b||.
    """
    dim = int(dim)
    M = cv_derivative_order(dim)
    needed = [a for a in itertools.product(range(2 * M + 1), repeat=dim)
              if sum(a) <= 2 * M]
    keyed = {tuple(int(v) for v in k): float(v) for k, v in sup_norms.items()}
    missing = [a for a in needed if a not in keyed]
    if missing:
        raise ValueError(f"missing derivative sup-norms for {missing[:4]} ...")
    const = (2.0 ** (dim + 1) / (dim + 2)) * math.pi ** ((3 * dim - 1) / 2.0) \
        / math.gamma((dim + 1) / 2.0)
    return const * sum(keyed[a] for a in needed)


def x_derivative_sup_norms(pot: FourierPotential, order: int, res: int = 2048,
                           eta_sup: float = 1.0) -> dict:
    """Sup-norms of d^alpha_x [W(x) g(eta)] for |alpha| <= order.

    Valid for product symbols with sup|g| = eta_sup; derivatives act on the
    trigonometric factor only, so they stay trig polynomials.
    """
    out = {}
    for alpha in itertools.product(range(order + 1), repeat=pot.dim):
        if sum(alpha) > order:
            continue
        # (i q)^alpha multiplies each coefficient
        coeffs = {}
        for q, c in pot.coeffs.items():
            fac = 1.0 + 0.0j
            for qi, ai in zip(q, alpha):
                fac *= (1j * qi) ** ai
            if fac != 0:
                coeffs[q] = c * fac
        if not coeffs:
            out[alpha] = 0.0
            continue
        # derivative of a real V need not be Hermitian-symmetric-safe to
        # build as a potential when odd; scan the trig sum directly
        grid_res = res if pot.dim == 1 else min(res, 128)
        axis = np.arange(grid_res) * (TWO_PI / grid_res)
        grids = np.meshgrid(*([axis] * pot.dim), indexing="ij")
        pts = np.stack([g.reshape(-1) for g in grids], axis=-1)
        acc = np.zeros(pts.shape[0], dtype=complex)
        for q, c in sorted(coeffs.items()):
            acc += c * np.exp(1j * (pts @ np.asarray(q, dtype=float)))
        out[alpha] = float(np.max(np.abs(acc))) * float(eta_sup)
    return out
