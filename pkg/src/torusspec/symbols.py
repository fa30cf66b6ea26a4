"""Phase-space functions b(x, eta) on T^n x R^n.

A symbol carries its evaluator plus whatever structure is known about it:
an exact x-Fourier transform (used by the quantiser to avoid quadrature),
a bandwidth in x, analytic gradients, or the underlying potential when the
symbol is mechanical, |eta|^2/2 + V(x).  Numeric symbols obtained by
composing with a flow advertise themselves as expensive so downstream
solvers know to build an interpolation table first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .potentials import FourierPotential


@dataclass
class PhaseSpaceFunction:
    """b(x, eta), evaluated on batched arrays of shape (m, dim)."""

    dim: int
    fn: Callable
    x_bandwidth: Optional[int] = None          # None: not band-limited / unknown
    x_fourier: Optional[Callable] = None       # (q tuple, eta (m, dim)) -> values
    is_real: bool = True
    grad_x: Optional[Callable] = None
    grad_eta: Optional[Callable] = None
    potential: Optional[FourierPotential] = None   # set for |eta|^2/2 + V
    expensive: bool = False

    def __call__(self, x, eta):
        return self.fn(np.asarray(x, dtype=float), np.asarray(eta, dtype=float))

    def periodicity_defect(self, probes: int = 16, seed: int = 7) -> float:
        """max |b(x + 2 pi e_i, eta) - b(x, eta)| over random probes."""
        rng = np.random.default_rng(seed)
        x = rng.uniform(0.0, 2.0 * math.pi, size=(probes, self.dim))
        eta = rng.uniform(-2.0, 2.0, size=(probes, self.dim))
        base = self(x, eta)
        worst = 0.0
        for i in range(self.dim):
            shifted = x.copy()
            shifted[:, i] += 2.0 * math.pi
            worst = max(worst, float(np.max(np.abs(self(shifted, eta) - base))))
        return worst


def _batch(x, eta, dim):
    x = np.asarray(x, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if x.ndim == 1 and dim == 1:
        x = x[:, None]
    if eta.ndim == 1 and dim == 1:
        eta = eta[:, None]
    return x, eta


def mechanical_symbol(pot: FourierPotential) -> PhaseSpaceFunction:
    """H(x, eta) = |eta|^2 / 2 + V(x), with exact Fourier data and gradients."""
    dim = pot.dim

    def fn(x, eta):
        x, eta = _batch(x, eta, dim)
        return 0.5 * np.sum(eta ** 2, axis=-1) + pot.evaluate(x)

    def xf(q, eta):
        eta = np.asarray(eta, dtype=float)
        if eta.ndim == 1 and dim == 1:
            eta = eta[:, None]
        vals = np.full(eta.shape[0], pot.coefficient(q), dtype=complex)
        if all(v == 0 for v in q):
            vals = vals + 0.5 * np.sum(eta ** 2, axis=-1)
        return vals

    def gx(x, eta):
        x, _ = _batch(x, eta, dim)
        return pot.gradient(x).reshape(x.shape)

    def ge(x, eta):
        _, eta = _batch(x, eta, dim)
        return eta.copy()

    return PhaseSpaceFunction(
        dim=dim, fn=fn, x_bandwidth=pot.max_frequency, x_fourier=xf,
        grad_x=gx, grad_eta=ge, potential=pot,
    )


def kinetic_symbol(dim: int = 1) -> PhaseSpaceFunction:
    """b(x, eta) = |eta|^2 / 2 (free motion generator)."""
    from .potentials import zero_potential
    return mechanical_symbol(zero_potential(dim))


def potential_symbol(pot: FourierPotential) -> PhaseSpaceFunction:
    """b(x, eta) = V(x) (multiplication operator symbol)."""
    dim = pot.dim

    def fn(x, eta):
        x, _ = _batch(x, eta, dim)
        return pot.evaluate(x)

    def xf(q, eta):
        eta = np.asarray(eta, dtype=float)
        m = eta.shape[0] if eta.ndim > 0 else 1
        return np.full(m, pot.coefficient(q), dtype=complex)

    def gx(x, eta):
        x, _ = _batch(x, eta, dim)
        return pot.gradient(x).reshape(x.shape)

    def ge(x, eta):
        x, eta = _batch(x, eta, dim)
        return np.zeros_like(eta)

    return PhaseSpaceFunction(dim=dim, fn=fn, x_bandwidth=pot.max_frequency,
                              x_fourier=xf, grad_x=gx, grad_eta=ge)


def constant_symbol(value: float, dim: int = 1) -> PhaseSpaceFunction:
    value = float(value)

    def fn(x, eta):
        x, _ = _batch(x, eta, dim)
        return np.full(x.shape[0], value)

    def xf(q, eta):
        eta = np.asarray(eta, dtype=float)
        m = eta.shape[0] if eta.ndim > 0 else 1
        c = value if all(v == 0 for v in q) else 0.0
        return np.full(m, c, dtype=complex)

    def gzero(x, eta):
        x, eta = _batch(x, eta, dim)
        return np.zeros_like(x)

    return PhaseSpaceFunction(dim=dim, fn=fn, x_bandwidth=0, x_fourier=xf,
                              grad_x=gzero, grad_eta=gzero)


def product_symbol(pot: FourierPotential, eta_fn: Callable,
                   eta_grad: Optional[Callable] = None) -> PhaseSpaceFunction:
    """b(x, eta) = W(x) * g(|eta| profile), W a trig polynomial, g scalar.

    The x-Fourier transform stays exact: b_hat(q, eta) = c_q g(eta).
    eta_fn maps an (m, dim) batch to (m,) values; eta_grad, if given, to the
    (m, dim) gradient.
    """
    dim = pot.dim

    def fn(x, eta):
        x, eta = _batch(x, eta, dim)
        return pot.evaluate(x) * eta_fn(eta)

    def xf(q, eta):
        eta = np.asarray(eta, dtype=float)
        if eta.ndim == 1 and dim == 1:
            eta = eta[:, None]
        return pot.coefficient(q) * eta_fn(eta)

    def gx(x, eta):
        x, eta = _batch(x, eta, dim)
        return pot.gradient(x).reshape(x.shape) * eta_fn(eta)[:, None]

    if eta_grad is not None:
        def ge(x, eta):
            x, eta = _batch(x, eta, dim)
            return eta_grad(eta) * pot.evaluate(x)[:, None]
    else:
        # profile-only differences: much cheaper than differencing the full
        # symbol, and the flows downstream call this in their inner loop
        def ge(x, eta, _step=1e-6):
            x, eta = _batch(x, eta, dim)
            cols = []
            for i in range(dim):
                e = np.zeros(dim)
                e[i] = _step
                cols.append((eta_fn(eta + e) - eta_fn(eta - e)) / (2 * _step))
            return np.stack(cols, axis=-1) * pot.evaluate(x)[:, None]

    return PhaseSpaceFunction(dim=dim, fn=fn, x_bandwidth=pot.max_frequency,
                              x_fourier=xf, grad_x=gx, grad_eta=ge)


def add_symbols(a: PhaseSpaceFunction, b: PhaseSpaceFunction) -> PhaseSpaceFunction:
    if a.dim != b.dim:
        raise ValueError("symbol dimensions differ")
    bw = None
    if a.x_bandwidth is not None and b.x_bandwidth is not None:
        bw = max(a.x_bandwidth, b.x_bandwidth)
    xf = None
    if a.x_fourier is not None and b.x_fourier is not None:
        def xf(q, eta):
            return a.x_fourier(q, eta) + b.x_fourier(q, eta)
    return PhaseSpaceFunction(
        dim=a.dim,
        fn=lambda x, eta: a.fn(x, eta) + b.fn(x, eta),
        x_bandwidth=bw,
        x_fourier=xf,
        is_real=a.is_real and b.is_real,
        expensive=a.expensive or b.expensive,
    )


def bump_profile(plateau: float, support: float) -> Callable:
    """Smooth radial cutoff in eta: 1 for |eta| <= plateau, 0 beyond support.

    Standard C-infinity transition exp(-1/t) glued on [plateau, support].
    """
    r0 = float(plateau)
    r1 = float(support)
    if not (0.0 < r0 < r1):
        raise ValueError("need 0 < plateau < support")

    def smooth_step(t):
        # 1 at t<=0, 0 at t>=1
        t = np.clip(t, 0.0, 1.0)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            f = np.where(t > 0.0, np.exp(-1.0 / np.where(t > 0.0, t, 1.0)), 0.0)
            g = np.where(t < 1.0, np.exp(-1.0 / np.where(t < 1.0, 1.0 - t, 1.0)), 0.0)
        return g / (f + g)

    def profile(eta):
        eta = np.asarray(eta, dtype=float)
        if eta.ndim == 1:
            r = np.abs(eta)
        else:
            r = np.sqrt(np.sum(eta ** 2, axis=-1))
        return smooth_step((r - r0) / (r1 - r0))

    return profile


def symbol_from_terms(data: dict, dim: Optional[int] = None) -> PhaseSpaceFunction:
    """Build a symbol from the term-list form.

    Each term is {"q": [...], "eta_powers": [...], "re": r, "im": s} meaning
    (r + i s) exp(i q.x) prod_i eta_i^p_i.  Reality is not forced; the
    is_real flag records whether the terms pair up Hermitianly.
    """
    terms = data.get("terms")
    if terms is None:
        raise ValueError("symbol specification must carry 'terms'")
    parsed = []
    for t in terms:
        q = tuple(int(v) for v in t["q"])
        powers = tuple(int(v) for v in t["eta_powers"])
        if dim is None:
            dim = len(q)
        if len(q) != dim or len(powers) != dim:
            raise ValueError("inconsistent dimensions in symbol terms")
        if any(p < 0 for p in powers):
            raise ValueError("eta powers must be non-negative")
        parsed.append((q, powers, complex(float(t["re"]), float(t.get("im", 0.0)))))
    if dim is None:
        raise ValueError("cannot infer dimension from an empty term list")

    table = {}
    for q, powers, c in parsed:
        table.setdefault(q, []).append((powers, c))

    hermitian = True
    for q, plist in table.items():
        mirror = {p: c for p, c in table.get(tuple(-v for v in q), [])}
        for powers, c in plist:
            if abs(mirror.get(powers, 0.0j) - c.conjugate()) > 1e-12 * max(1.0, abs(c)):
                hermitian = False

    bandwidth = max((max(abs(v) for v in q) for q, _, _ in parsed), default=0)

    def eta_poly(powers, eta):
        out = np.ones(eta.shape[0])
        for i, p in enumerate(powers):
            if p:
                out = out * eta[:, i] ** p
        return out

    def fn(x, eta):
        x, eta = _batch(x, eta, dim)
        acc = np.zeros(x.shape[0], dtype=complex)
        for q, powers, c in parsed:
            acc += c * np.exp(1j * (x @ np.asarray(q, dtype=float))) * eta_poly(powers, eta)
        if hermitian:
            return acc.real
        return acc

    def xf(q, eta):
        eta = np.asarray(eta, dtype=float)
        if eta.ndim == 1 and dim == 1:
            eta = eta[:, None]
        acc = np.zeros(eta.shape[0], dtype=complex)
        for powers, c in table.get(tuple(q), []):
            acc += c * eta_poly(powers, eta)
        return acc

    return PhaseSpaceFunction(dim=dim, fn=fn, x_bandwidth=bandwidth,
                              x_fourier=xf, is_real=hermitian)
