"""Real trigonometric potentials on the flat torus (R/2piZ)^n.

A potential is stored by its Fourier coefficients on integer frequency
vectors q, V(x) = sum_q c_q exp(i q.x), with the reality constraint
c_{-q} = conj(c_q).  All transforms that preserve the spectrum of the
associated Schrodinger operator (translations, reflection) act on the
coefficients exactly, without touching any grid.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

TWO_PI = 2.0 * math.pi

# File loader rejects frequencies beyond this band; keeps runs at desk scale.
MAX_FILE_FREQUENCY = 64

_HERMITIAN_TOL = 1e-12
_IMAG_TOL = 1e-12


def wrap_angles(x):
    """Reduce torus coordinates modulo 2*pi into [0, 2*pi)."""
    return np.mod(np.asarray(x, dtype=float), TWO_PI)


def _as_freq(q, dim: int) -> tuple:
    if np.isscalar(q):
        qt = (int(q),)
    else:
        qt = tuple(int(v) for v in q)
    if len(qt) != dim:
        raise ValueError(f"frequency {qt} does not match dimension {dim}")
    return qt


@dataclass(frozen=True)
class FourierPotential:
    """V(x) = sum_q c_q exp(i q.x) with c_{-q} = conj(c_q).

    The coefficient table is validated at construction; evaluation is real
    by symmetry and the residual imaginary part (roundoff only) is dropped.
    """

    dim: int
    coeffs: Mapping[tuple, complex]

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValueError("dimension must be a positive integer")
        object.__setattr__(self, "dim", int(self.dim))
        clean = {}
        for q, c in dict(self.coeffs).items():
            qt = _as_freq(q, self.dim)
            c = complex(c)
            if c != 0:
                clean[qt] = c
        for q, c in clean.items():
            mq = tuple(-v for v in q)
            if abs(clean.get(mq, 0.0j) - c.conjugate()) > _HERMITIAN_TOL * max(1.0, abs(c)):
                raise ValueError(f"coefficients violate Hermitian symmetry at q={q}")
        object.__setattr__(self, "coeffs", clean)

    # -- basic queries ---------------------------------------------------

    def items(self):
        """Coefficients in a fixed (sorted) order, for determinism."""
        return sorted(self.coeffs.items())

    @property
    def max_frequency(self) -> int:
        """Bandwidth: largest |q|_inf carrying a nonzero coefficient."""
        if not self.coeffs:
            return 0
        return max(max(abs(v) for v in q) for q in self.coeffs)

    def coefficient(self, q) -> complex:
        return self.coeffs.get(_as_freq(q, self.dim), 0.0j)

    @property
    def mean(self) -> float:
        return self.coefficient((0,) * self.dim).real

    # -- evaluation ------------------------------------------------------

    def _points(self, x):
        """Normalise input to an (m, dim) batch plus the output shape."""
        x = np.asarray(x, dtype=float)
        if self.dim == 1:
            if x.ndim >= 2 and x.shape[-1] == 1:
                return x.reshape(-1, 1), x.shape[:-1]
            return x.reshape(-1, 1), x.shape
        if x.ndim == 0 or x.shape[-1] != self.dim:
            raise ValueError(f"points must have trailing axis of length {self.dim}")
        return x.reshape(-1, self.dim), x.shape[:-1]

    def evaluate(self, x):
        """V(x), vectorised; real output."""
        pts, shape = self._points(x)
        acc = np.zeros(pts.shape[0], dtype=complex)
        for q, c in self.items():
            acc += c * np.exp(1j * (pts @ np.asarray(q, dtype=float)))
        if acc.size and np.max(np.abs(acc.imag)) > _IMAG_TOL * max(1.0, np.max(np.abs(acc.real)) if acc.size else 1.0):
            raise ArithmeticError("potential evaluation produced a non-real value")
        out = acc.real.reshape(shape)
        return out if out.shape else float(out)

    def __call__(self, x):
        return self.evaluate(x)

    def gradient(self, x):
        """grad V(x).  Batched input (m, dim) gives (m, dim); for dim 1 a bare
        array gives the elementwise derivative with the same shape."""
        pts, shape = self._points(x)
        acc = np.zeros((pts.shape[0], self.dim), dtype=complex)
        for q, c in self.items():
            qa = np.asarray(q, dtype=float)
            acc += (1j * c) * np.exp(1j * (pts @ qa))[:, None] * qa[None, :]
        grad = acc.real
        if self.dim == 1 and shape == np.asarray(x).shape:
            return grad[:, 0].reshape(shape)
        return grad.reshape(shape + (self.dim,))

    # -- exact isospectral transforms ------------------------------------

    def translate(self, a) -> "FourierPotential":
        """x -> x + a on the torus: coefficients pick up the phase exp(i q.a)."""
        if np.isscalar(a):
            a = (float(a),)
        a = np.asarray(a, dtype=float)
        if a.shape != (self.dim,):
            raise ValueError("translation vector has wrong dimension")
        new = {q: c * np.exp(1j * float(np.dot(q, a))) for q, c in self.coeffs.items()}
        return FourierPotential(self.dim, new)

    def reflect(self) -> "FourierPotential":
        """x -> -x: frequency table is permuted, q -> -q."""
        new = {tuple(-v for v in q): c for q, c in self.coeffs.items()}
        return FourierPotential(self.dim, new)

    # -- algebra ---------------------------------------------------------

    def __add__(self, other: "FourierPotential") -> "FourierPotential":
        if not isinstance(other, FourierPotential):
            return NotImplemented
        if other.dim != self.dim:
            raise ValueError("cannot add potentials of different dimensions")
        new = dict(self.coeffs)
        for q, c in other.coeffs.items():
            new[q] = new.get(q, 0.0j) + c
        return FourierPotential(self.dim, new)

    def __mul__(self, factor) -> "FourierPotential":
        factor = float(factor)
        return FourierPotential(self.dim, {q: factor * c for q, c in self.coeffs.items()})

    __rmul__ = __mul__

    def __neg__(self) -> "FourierPotential":
        return self * (-1.0)


# -- factories -----------------------------------------------------------


def zero_potential(dim: int = 1) -> FourierPotential:
    return FourierPotential(dim, {})


def cosine(q, amplitude: float = 1.0) -> FourierPotential:
    """amplitude * cos(q.x)."""
    qt = tuple(int(v) for v in np.atleast_1d(q))
    mq = tuple(-v for v in qt)
    half = 0.5 * float(amplitude)
    if qt == mq:
        return FourierPotential(len(qt), {qt: float(amplitude)})
    return FourierPotential(len(qt), {qt: half, mq: half})


def sine(q, amplitude: float = 1.0) -> FourierPotential:
    """amplitude * sin(q.x)."""
    qt = tuple(int(v) for v in np.atleast_1d(q))
    mq = tuple(-v for v in qt)
    if qt == mq:
        raise ValueError("sin of the zero frequency vanishes")
    half = -0.5j * float(amplitude)
    return FourierPotential(len(qt), {qt: half, mq: half.conjugate()})


# -- extrema -------------------------------------------------------------


@dataclass(frozen=True)
class ExtremaReport:
    """Grid-scan extrema of a potential.

    Finer resolutions only expand the scanned set (nested grids), so the
    reported min never increases and the max never decreases under doubling.
    """

    min_value: float
    max_value: float
    argmin: np.ndarray
    argmax: np.ndarray
    resolution: int


def potential_extrema(pot: FourierPotential, res: int = 1024) -> ExtremaReport:
    """Scan V on a uniform grid with `res` points per axis."""
    res = int(res)
    if res < 8:
        raise ValueError("resolution below 8 is rejected")
    axis = np.arange(res) * (TWO_PI / res)
    grids = np.meshgrid(*([axis] * pot.dim), indexing="ij")
    pts = np.stack([g.reshape(-1) for g in grids], axis=-1)
    vals = pot.evaluate(pts if pot.dim > 1 else pts)
    vals = np.asarray(vals).reshape(-1)
    imin = int(np.argmin(vals))
    imax = int(np.argmax(vals))
    return ExtremaReport(
        min_value=float(vals[imin]),
        max_value=float(vals[imax]),
        argmin=pts[imin].copy(),
        argmax=pts[imax].copy(),
        resolution=res,
    )


def sup_norm(pot: FourierPotential, res: int = 2048, remove_mean: bool = False) -> float:
    """C^0 norm of V (optionally of V minus its mean) by grid scan."""
    shifted = pot + FourierPotential(pot.dim, {(0,) * pot.dim: -pot.mean}) if remove_mean else pot
    if not shifted.coeffs:
        return 0.0
    if pot.dim >= 2:
        res = min(res, 256)
    rep = potential_extrema(shifted, res)
    return max(abs(rep.min_value), abs(rep.max_value))


# -- serialisation -------------------------------------------------------


def potential_to_dict(pot: FourierPotential) -> dict:
    entries = [
        {"q": list(q), "re": c.real, "im": c.imag}
        for q, c in pot.items()
    ]
    return {"dim": pot.dim, "coeffs": entries}


def potential_from_dict(data: dict) -> FourierPotential:
    try:
        dim = int(data["dim"])
        entries = data["coeffs"]
    except (KeyError, TypeError) as exc:
        raise ValueError("potential file must carry 'dim' and 'coeffs'") from exc
    coeffs = {}
    for entry in entries:
        q = _as_freq(entry["q"], dim)
        if max(abs(v) for v in q) > MAX_FILE_FREQUENCY:
            raise ValueError(f"frequency {q} beyond the supported band |q|<= {MAX_FILE_FREQUENCY}")
        coeffs[q] = coeffs.get(q, 0.0j) + complex(float(entry["re"]), float(entry.get("im", 0.0)))
    return FourierPotential(dim, coeffs)


def save_potential(pot: FourierPotential, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(potential_to_dict(pot), fh, indent=2)
        fh.write("\n")


def load_potential(path) -> FourierPotential:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return potential_from_dict(data)
