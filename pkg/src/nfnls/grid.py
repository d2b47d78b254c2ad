"""Periodic grid, sampled complex fields and the discrete Fourier transform.

The forward transform approximates the Fourier integral on the line::

    f_hat(xi_m) = dx * sum_j f(x_j) exp(-i xi_m x_j)

with ``x_j = -L/2 + j dx`` and ``xi_m = dxi * m`` for ``m = -M/2 .. M/2-1``.
The inverse carries the ``dxi / (2 pi) = 1 / L`` factor.  Spectra are stored
centered, in increasing frequency order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.fft as sfft

# worker count handed to scipy.fft; the CLI --threads flag sets it
FFT_WORKERS = 1


def set_fft_workers(n: int) -> None:
    global FFT_WORKERS
    FFT_WORKERS = max(1, int(n))


@dataclass(frozen=True)
class GridSpec:
    """Periodic grid on ``[-L/2, L/2)`` with ``M`` samples."""

    L: float = 64 * np.pi
    M: int = 4096

    def __post_init__(self):
        if self.L <= 0:
            raise ValueError(f"domain length must be positive, got {self.L}")
        if self.M < 2 or self.M & (self.M - 1):
            raise ValueError(f"sample count must be a power of two, got {self.M}")

    @property
    def dx(self) -> float:
        return self.L / self.M

    @property
    def dxi(self) -> float:
        return 2 * np.pi / self.L

    @property
    def modes_per_unit_box(self) -> int:
        return int(round(1 / self.dxi))

    @property
    def xi_max(self) -> float:
        """Largest |xi| representable (the Nyquist magnitude)."""
        return self.M / 2 * self.dxi

    @property
    def max_resolved_box(self) -> int:
        """Largest k whose window support B(k, 3/4) fits inside the band."""
        return int(np.floor(self.xi_max - self.dxi - 0.75 + 1e-12))

    @cached_property
    def x(self) -> np.ndarray:
        return -self.L / 2 + self.dx * np.arange(self.M)

    @cached_property
    def xi(self) -> np.ndarray:
        return self.dxi * np.arange(-self.M // 2, self.M // 2)

    def index_of(self, xi: float) -> int:
        """Centered-array index of the grid frequency nearest to ``xi``."""
        return int(round(xi / self.dxi)) + self.M // 2

    def check_resolved(self, k: int) -> None:
        if abs(k) > self.max_resolved_box:
            raise ValueError(
                f"box {k} lies outside the resolved band |k| <= {self.max_resolved_box}"
            )


def _sign(M: int) -> np.ndarray:
    return np.where(np.arange(-M // 2, M // 2) % 2 == 0, 1.0, -1.0)


def spectrum_from_samples(samples: np.ndarray, L: float) -> np.ndarray:
    """Centered spectrum of physical samples on the grid of length ``L``."""
    M = samples.shape[-1]
    out = sfft.fftshift(sfft.fft(samples, axis=-1, workers=FFT_WORKERS), axes=-1)
    return out * (_sign(M) * (L / M))


def samples_from_spectrum(spectrum: np.ndarray, L: float, P: int | None = None) -> np.ndarray:
    """Physical samples from a centered spectrum.

    With ``P > M`` the spectrum is zero padded, which evaluates the same
    trigonometric polynomial on a finer grid of ``P`` points.
    """
    M = spectrum.shape[-1]
    P = M if P is None else P
    g = spectrum * _sign(M)
    if P != M:
        pad = np.zeros(spectrum.shape[:-1] + (P,), dtype=complex)
        pad[..., P // 2 - M // 2 : P // 2 + M // 2] = g
        g = pad
    return sfft.ifft(sfft.ifftshift(g, axes=-1), axis=-1, workers=FFT_WORKERS) * (P / L)


def truncate_spectrum(spectrum_P: np.ndarray, M: int) -> np.ndarray:
    P = spectrum_P.shape[-1]
    return spectrum_P[..., P // 2 - M // 2 : P // 2 + M // 2]


def _check_finite(a: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(a)):
        bad = int(np.count_nonzero(~np.isfinite(a)))
        raise ValueError(f"{what} contains {bad} non-finite values")


@dataclass(frozen=True, eq=False)
class Field:
    """Complex samples on a ``GridSpec``; the spectrum is computed lazily."""

    grid: GridSpec
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        if s.shape != (self.grid.M,):
            raise ValueError(f"expected {self.grid.M} samples, got shape {s.shape}")
        _check_finite(s, "field samples")
        object.__setattr__(self, "samples", s)

    @classmethod
    def from_spectrum(cls, grid: GridSpec, spectrum: np.ndarray) -> "Field":
        spectrum = np.asarray(spectrum, dtype=complex)
        _check_finite(spectrum, "spectrum")
        f = cls(grid, samples_from_spectrum(spectrum, grid.L))
        f.__dict__["spectrum"] = spectrum
        return f

    @classmethod
    def zeros(cls, grid: GridSpec) -> "Field":
        return cls.from_spectrum(grid, np.zeros(grid.M, dtype=complex))

    @cached_property
    def spectrum(self) -> np.ndarray:
        return spectrum_from_samples(self.samples, self.grid.L)

    def l2(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.samples) ** 2) * self.grid.dx))

    def lp(self, p: float) -> float:
        return lp_norm(self.samples, self.grid.dx, p)

    def __add__(self, other: "Field") -> "Field":
        return Field.from_spectrum(self.grid, self.spectrum + other.spectrum)

    def __sub__(self, other: "Field") -> "Field":
        return Field.from_spectrum(self.grid, self.spectrum - other.spectrum)

    def scale(self, c: complex) -> "Field":
        return Field.from_spectrum(self.grid, c * self.spectrum)

    def conj(self) -> "Field":
        return Field(self.grid, np.conj(self.samples))


def lp_norm(samples: np.ndarray, dx: float, p: float) -> float:
    """Rectangle-rule L^p norm; ``p = inf`` is the max of |samples|."""
    a = np.abs(samples)
    if np.isinf(p):
        return float(a.max(initial=0.0))
    return float((np.sum(a**p) * dx) ** (1.0 / p))


def dft(f: Field) -> Field:
    """Return ``f`` with its spectrum populated."""
    _check_finite(f.samples, "field samples")
    _ = f.spectrum
    return f


def idft(grid: GridSpec, spectrum: np.ndarray) -> Field:
    return Field.from_spectrum(grid, spectrum)


def direct_dft(samples: np.ndarray, L: float) -> np.ndarray:
    """O(M^2) reference transform, straight from the defining sum."""
    M = samples.shape[-1]
    dx = L / M
    x = -L / 2 + dx * np.arange(M)
    xi = 2 * np.pi / L * np.arange(-M // 2, M // 2)
    return dx * np.exp(-1j * np.outer(xi, x)) @ samples


def make_gaussian(
    grid: GridSpec,
    amplitude: float = 1.0,
    width: float = 1.0,
    center: float = 0.0,
    modulation: float = 0.0,
) -> Field:
    """Periodized Gaussian ``a exp(-(x-x0)^2 / (2 w^2)) exp(i xi0 x)``."""
    if width <= 0:
        raise ValueError("width must be positive")
    L = grid.L
    edge = np.exp(-((L / 2 - abs(center)) ** 2) / (2 * width**2))
    if edge >= 1e-14:
        raise ValueError(
            f"Gaussian tail at the domain edge is {edge:.2e} of the peak; grid too small"
        )
    x = grid.x
    s = np.zeros(grid.M, dtype=complex)
    # the image copies are far below the tail threshold but sum them anyway
    for shift in (-L, 0.0, L):
        s += np.exp(-((x - center + shift) ** 2) / (2 * width**2))
    s *= amplitude * np.exp(1j * modulation * x)
    return Field(grid, s)


def bump(t: np.ndarray) -> np.ndarray:
    """exp(-1/(1-t^2)) on (-1, 1), zero outside."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


def make_boxdata(
    grid: GridSpec,
    coefficients: dict[int, complex],
    profile_halfwidth: float = 0.25,
) -> Field:
    """Field whose spectrum is ``sum_k c_k * b((xi - k) / h)``.

    ``b`` is a smooth bump and ``h = profile_halfwidth``.  The default
    ``h = 1/4`` keeps each profile where the box window equals one, so the
    k-th coefficient contributes to box k only.
    """
    if not coefficients:
        return Field.zeros(grid)
    K = max(abs(int(k)) for k in coefficients)
    if K + profile_halfwidth >= grid.xi_max - grid.dxi:
        raise ValueError(f"box index {K} does not fit inside the band |xi| < {grid.xi_max}")
    xi = grid.xi
    spec = np.zeros(grid.M, dtype=complex)
    for k, c in coefficients.items():
        spec += c * bump((xi - k) / profile_halfwidth)
    return Field.from_spectrum(grid, spec)


# --- binary and CSV IO ------------------------------------------------------

_HEADER = struct.Struct("<Qd")


def write_field(path: str | Path, f: Field) -> None:
    data = np.empty(2 * f.grid.M, dtype="<f8")
    data[0::2] = f.samples.real
    data[1::2] = f.samples.imag
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(f.grid.M, f.grid.L))
        fh.write(data.tobytes())


def read_field(path: str | Path) -> Field:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    M, L = _HEADER.unpack_from(raw)
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if data.size != 2 * M:
        raise ValueError(f"{path}: expected {2 * M} floats, found {data.size}")
    return Field(GridSpec(L=L, M=int(M)), data[0::2] + 1j * data[1::2])


def fmt(v: float) -> str:
    return f"{v:.17g}"


def write_field_csv(path: str | Path, f: Field) -> None:
    with open(path, "w") as fh:
        fh.write("x,re,im\n")
        for x, z in zip(f.grid.x, f.samples):
            fh.write(f"{fmt(x)},{fmt(z.real)},{fmt(z.imag)}\n")
