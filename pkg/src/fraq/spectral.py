"""Spectral core for flat tori.

States live on a truncated Fourier lattice of the d-torus (d = 1 or 2) with
equispaced collocation nodes x_j = 2*pi*j/n per axis.  Coefficients are taken
against the orthonormal basis

    phi_k(x) = (2*pi)^(-d/2) * exp(i k.x),

so Parseval holds without extra factors and Sobolev norms read directly off
the coefficients.  The lattice keeps integer frequencies -n/2 < k < n/2; the
Nyquist row/column k = -n/2 is projected to zero on ingest and never evolved,
which keeps the lattice symmetric under k -> -k.

Coefficient arrays are stored in numpy FFT layout (frequency order
0, 1, ..., n/2-1, -n/2, ..., -1 per axis).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

__all__ = [
    "TorusGrid",
    "SpectralField",
    "Multiplier",
    "to_spectral",
    "apply_multiplier",
    "sobolev_norm",
    "integrate_physical",
    "inner",
    "lambda_multiplier",
    "bessel_multiplier",
    "random_field",
    "save_state",
    "load_state",
]


class TorusGrid:
    """Collocation grid on the d-torus [0, 2*pi)^d with n nodes per axis.

    Parameters
    ----------
    d : spatial dimension, 1 or 2.
    n : modes per dimension; must be even and >= 8.
    """

    def __init__(self, d: int, n: int):
        if d not in (1, 2):
            raise ValueError(f"grid dimension must be 1 or 2, got {d}")
        if n % 2 != 0 or n < 8:
            raise ValueError(f"modes per dimension must be even and >= 8, got {n}")
        self.d = int(d)
        self.n = int(n)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def total_modes(self) -> int:
        return self.n**self.d

    @property
    def volume(self) -> float:
        return (2.0 * np.pi) ** self.d

    @property
    def cell(self) -> float:
        """Quadrature weight of one node, (2*pi/n)^d."""
        return (2.0 * np.pi / self.n) ** self.d

    def axis_points(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n) / self.n

    def points(self) -> tuple[np.ndarray, ...]:
        """Meshgrid of collocation nodes, one array per axis."""
        x = self.axis_points()
        if self.d == 1:
            return (x,)
        return tuple(np.meshgrid(x, x, indexing="ij"))

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Integer frequencies per axis in FFT layout, broadcastable to shape."""
        k = np.fft.fftfreq(self.n, d=1.0 / self.n)
        if self.d == 1:
            return (k,)
        return (k[:, None], k[None, :])

    @cached_property
    def k_squared(self) -> np.ndarray:
        out = np.zeros(self.shape)
        for ka in self.wavenumbers:
            out = out + ka**2
        return out

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """Boolean mask, True at the excluded k = -n/2 frequencies."""
        mask = np.zeros(self.shape, dtype=bool)
        for ka in self.wavenumbers:
            mask |= ka == -self.n // 2
        return mask

    @cached_property
    def dealias_keep(self) -> np.ndarray:
        """2/3-rule mask: True where |k| <= floor(n/3) on every axis."""
        keep = np.ones(self.shape, dtype=bool)
        cut = self.n // 3
        for ka in self.wavenumbers:
            keep &= np.abs(ka) <= cut
        return keep

    @cached_property
    def retained_flat_indices(self) -> np.ndarray:
        """Flat indices (into FFT-layout arrays) of the retained lattice,
        ordered by ascending (k_1, ..., k_d) row-major."""
        half = self.n // 2
        order = np.argsort(np.fft.fftfreq(self.n, d=1.0 / self.n), kind="stable")
        axis = order[np.fft.fftfreq(self.n, d=1.0 / self.n)[order] != -half]
        if self.d == 1:
            return axis
        return (axis[:, None] * self.n + axis[None, :]).ravel()

    # transform scalings for the orthonormal convention
    @property
    def _coef_scale(self) -> float:
        return (2.0 * np.pi) ** (self.d / 2.0) / self.total_modes

    @property
    def _phys_scale(self) -> float:
        return self.total_modes / (2.0 * np.pi) ** (self.d / 2.0)

    def project(self, coeffs: np.ndarray) -> np.ndarray:
        """Zero the Nyquist frequencies in place and return the array."""
        coeffs[self.nyquist_mask] = 0.0
        return coeffs

    def fft(self, values: np.ndarray) -> np.ndarray:
        """Physical samples -> orthonormal coefficients (Nyquist projected)."""
        c = np.fft.fftn(values) * self._coef_scale
        return self.project(c)

    def ifft(self, coeffs: np.ndarray) -> np.ndarray:
        """Orthonormal coefficients -> physical samples."""
        return np.fft.ifftn(coeffs * self._phys_scale)

    def __eq__(self, other) -> bool:
        return isinstance(other, TorusGrid) and (self.d, self.n) == (other.d, other.n)

    def __hash__(self) -> int:
        return hash((self.d, self.n))

    def __repr__(self) -> str:
        return f"TorusGrid(d={self.d}, n={self.n})"


@dataclass
class SpectralField:
    """A state u on the torus, stored as orthonormal Fourier coefficients.

    Treated as immutable: arithmetic returns new fields.  Parseval ties the
    coefficient norm to the physical L2 norm.
    """

    grid: TorusGrid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape != self.grid.shape:
            raise ValueError(f"coefficient shape {c.shape} does not match grid {self.grid.shape}")
        self.coeffs = self.grid.project(c.copy())

    def to_physical(self) -> np.ndarray:
        return self.grid.ifft(self.coeffs)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2)))

    def conj_reflect(self) -> "SpectralField":
        """Pointwise complex conjugation in physical space (u_k -> conj(u_{-k}))."""
        idx = (-np.arange(self.grid.n)) % self.grid.n
        c = np.conj(self.coeffs)
        if self.grid.d == 1:
            c = c[idx]
        else:
            c = c[np.ix_(idx, idx)]
        return SpectralField(self.grid, c)

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy())

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _require_same_grid(self.grid, other.grid)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _require_same_grid(self.grid, other.grid)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar: complex) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)


@dataclass
class Multiplier:
    """A real Fourier symbol m(k) with a declared growth order mu.

    The growth constant C = max_k |m(k)| / (1+|k|^2)^(mu/2) is computed at
    construction; symbol values must be finite.
    """

    grid: TorusGrid
    symbol: np.ndarray
    order: float
    growth_const: float = field(init=False)

    def __post_init__(self):
        sym = np.asarray(self.symbol, dtype=np.float64)
        if sym.shape != self.grid.shape:
            raise ValueError("symbol shape does not match grid")
        if not np.all(np.isfinite(sym)):
            raise ValueError("symbol values must be finite")
        self.symbol = sym
        weight = (1.0 + self.grid.k_squared) ** (self.order / 2.0)
        self.growth_const = float(np.max(np.abs(sym) / weight))

    def __mul__(self, other: "Multiplier") -> "Multiplier":
        _require_same_grid(self.grid, other.grid)
        return Multiplier(self.grid, self.symbol * other.symbol, self.order + other.order)


def _require_same_grid(a: TorusGrid, b: TorusGrid) -> None:
    if a != b:
        raise ValueError(f"grid mismatch: {a} vs {b}")


def to_spectral(grid: TorusGrid, values: np.ndarray) -> SpectralField:
    """Project physical samples onto the retained lattice.

    to_physical(to_spectral(values)) is the identity up to the Nyquist
    projection; exact for band-limited samples.
    """
    values = np.asarray(values, dtype=np.complex128)
    if values.shape != grid.shape:
        raise ValueError(f"sample shape {values.shape} does not match grid {grid.shape}")
    return SpectralField(grid, grid.fft(values))


def apply_multiplier(u: SpectralField, m: Multiplier) -> SpectralField:
    _require_same_grid(u.grid, m.grid)
    return SpectralField(u.grid, u.coeffs * m.symbol)


def sobolev_norm(u: SpectralField, s: float) -> float:
    """H^s norm (sum_k (1+|k|^2)^s |u_k|^2)^(1/2)."""
    w = (1.0 + u.grid.k_squared) ** s
    return float(np.sqrt(np.sum(w * np.abs(u.coeffs) ** 2)))


def integrate_physical(grid: TorusGrid, values: np.ndarray) -> float:
    """Rectangle-rule quadrature (2*pi/n)^d * sum; spectrally accurate."""
    values = np.asarray(values)
    if values.shape != grid.shape:
        raise ValueError(f"sample shape {values.shape} does not match grid {grid.shape}")
    return float(grid.cell * np.sum(values))


def inner(u: SpectralField, v: SpectralField) -> complex:
    """Complex L2 inner product <u, v> = sum_k u_k conj(v_k)."""
    _require_same_grid(u.grid, v.grid)
    return complex(np.sum(u.coeffs * np.conj(v.coeffs)))


def lambda_multiplier(grid: TorusGrid, sigma: float) -> Multiplier:
    """Symbol |k|^sigma of the fractional Laplacian power (sqrt(-Delta))^sigma."""
    return Multiplier(grid, grid.k_squared ** (sigma / 2.0), order=sigma)


def bessel_multiplier(grid: TorusGrid, s: float) -> Multiplier:
    """Symbol (1+|k|^2)^(s/2) of (1 - Delta)^(s/2)."""
    return Multiplier(grid, (1.0 + grid.k_squared) ** (s / 2.0), order=s)


def random_field(
    grid: TorusGrid,
    rng: np.random.Generator,
    decay: float = 2.0,
    s_norm: float | None = None,
    norm: float = 1.0,
) -> SpectralField:
    """Random band-populated field with coefficients ~ CN(0,1)*(1+|k|^2)^(-decay/2).

    When ``s_norm`` is given the field is rescaled to H^{s_norm} norm ``norm``,
    otherwise to L2 norm ``norm``.
    """
    shp = grid.shape
    c = (rng.standard_normal(shp) + 1j * rng.standard_normal(shp)) / np.sqrt(2.0)
    c *= (1.0 + grid.k_squared) ** (-decay / 2.0)
    u = SpectralField(grid, c)
    cur = sobolev_norm(u, s_norm) if s_norm is not None else u.l2_norm()
    if cur == 0.0:
        raise ValueError("degenerate random draw")
    return u * (norm / cur)


def save_state(u: SpectralField, path: str | Path) -> None:
    """Write a field snapshot plus JSON sidecar.

    Format: little-endian 8-byte floats, interleaved (re, im), retained modes
    in row-major order of ascending (k_1, ..., k_d).  Sidecar at <path>.json.
    """
    path = Path(path)
    flat = u.coeffs.ravel()[u.grid.retained_flat_indices]
    np.ascontiguousarray(flat, dtype="<c16").tofile(path)
    sidecar = {
        "d": u.grid.d,
        "n": u.grid.n,
        "normalization": "orthonormal",
        "layout": "rowmajor-ascending-k",
    }
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2) + "\n")


def load_state(path: str | Path) -> SpectralField:
    path = Path(path)
    meta = json.loads(Path(str(path) + ".json").read_text())
    if meta.get("normalization") != "orthonormal" or meta.get("layout") != "rowmajor-ascending-k":
        raise ValueError(f"unsupported snapshot metadata in {path}.json")
    grid = TorusGrid(int(meta["d"]), int(meta["n"]))
    flat = np.fromfile(path, dtype="<c16")
    expect = (grid.n - 1) ** grid.d
    if flat.size != expect:
        raise ValueError(f"snapshot has {flat.size} modes, expected {expect}")
    coeffs = np.zeros(grid.total_modes, dtype=np.complex128)
    coeffs[grid.retained_flat_indices] = flat
    return SpectralField(grid, coeffs.reshape(grid.shape))
