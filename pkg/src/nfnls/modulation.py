"""Frequency windows, box operators and modulation-space norms."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from .grid import Field, GridSpec, bump, lp_norm, samples_from_spectrum

# metadata only: enters the diagnostic constant d_J in the trees module
DERIVATIVE_GROWTH_A = 1.1

SUPPORT = 0.75  # supp sigma_0 is inside (-3/4, 3/4)
FAT_SUPPORT = 17 / 16


@lru_cache(maxsize=None)
def _bump_mass() -> float:
    return integrate.quad(lambda s: float(bump(np.array([s]))[0]), -1, 1, epsabs=0, epsrel=1e-13)[0]


def smooth_step(t: np.ndarray) -> np.ndarray:
    """Normalized primitive of the bump: 0 for t <= -1, 1 for t >= 1."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.where(t >= 1, 1.0, 0.0)
    mid = np.flatnonzero((t > -1) & (t < 1))
    f = lambda s: float(np.exp(-1.0 / (1.0 - s * s)))
    for i in mid:
        # integrate from the nearer end for accuracy
        if t[i] <= 0:
            out[i] = integrate.quad(f, -1, t[i], epsabs=0, epsrel=1e-13)[0] / _bump_mass()
        else:
            out[i] = 1 - integrate.quad(f, t[i], 1, epsabs=0, epsrel=1e-13)[0] / _bump_mass()
    return out


def base_window(xi: np.ndarray) -> np.ndarray:
    """Indicator of [-1/2, 1/2) mollified by a bump of half-width 1/4."""
    xi = np.asarray(xi, dtype=float)
    # Phi(x) = smooth_step(4x) is the primitive of the mollifier
    return smooth_step(4 * (xi + 0.5)) - smooth_step(4 * (xi - 0.5))


def fattened_window(xi: np.ndarray) -> np.ndarray:
    """Equal to 1 on |xi| <= 3/4, smooth ramp to 0 at |xi| = 17/16."""
    a = np.abs(np.asarray(xi, dtype=float))
    r = 2 * (a - SUPPORT) / (FAT_SUPPORT - SUPPORT) - 1
    return 1 - smooth_step(r)


def japanese(k) -> np.ndarray:
    return np.sqrt(1.0 + np.asarray(k, dtype=float) ** 2)


@dataclass(frozen=True)
class ModParams:
    p: float = 2.0
    q: float = 2.0
    s: float = 0.0

    def __post_init__(self):
        if not (self.p >= 1 and self.q >= 1):
            raise ValueError(f"need p, q >= 1, got p={self.p}, q={self.q}")
        if self.s < 0:
            raise ValueError("s must be nonnegative")

    @property
    def q_prime(self) -> float:
        if self.q == 1:
            return np.inf
        if np.isinf(self.q):
            return 1.0
        return self.q / (self.q - 1)


@dataclass(frozen=True, eq=False)
class WindowFamily:
    """Translates sigma_k of the base window and their fattened versions.

    Each window is stored as a start index into the centered frequency
    array plus the (short) run of values over its support.
    """

    grid: GridSpec
    ks: np.ndarray
    start: dict = field(repr=False)
    values: dict = field(repr=False)
    fat_start: dict = field(repr=False)
    fat_values: dict = field(repr=False)
    lower_bound: float = 0.0
    overlap: int = 0

    def sigma(self, k: int, fattened: bool = False) -> np.ndarray:
        out = np.zeros(self.grid.M)
        i0, v = (self.fat_start[k], self.fat_values[k]) if fattened else (self.start[k], self.values[k])
        out[i0 : i0 + len(v)] = v
        return out

    def support(self, k: int, fattened: bool = False) -> slice:
        i0, v = (self.fat_start[k], self.fat_values[k]) if fattened else (self.start[k], self.values[k])
        return slice(i0, i0 + len(v))

    def local(self, k: int, fattened: bool = False) -> tuple[int, np.ndarray]:
        if fattened:
            return self.fat_start[k], self.fat_values[k]
        return self.start[k], self.values[k]

    def apply(self, spectrum: np.ndarray, k: int, fattened: bool = False) -> np.ndarray:
        i0, v = self.local(k, fattened)
        out = np.zeros_like(spectrum)
        out[..., i0 : i0 + len(v)] = spectrum[..., i0 : i0 + len(v)] * v
        return out

    @property
    def resolved(self) -> range:
        K = self.grid.max_resolved_box
        return range(-K, K + 1)


_FAMILIES: dict[GridSpec, WindowFamily] = {}


def build_windows(grid: GridSpec) -> WindowFamily:
    if grid.modes_per_unit_box < 8:
        raise ValueError(
            f"grid has {grid.modes_per_unit_box} modes per unit box; at least 8 are needed"
        )
    if grid in _FAMILIES:
        return _FAMILIES[grid]
    xi = grid.xi
    kmax = int(np.ceil(grid.xi_max + SUPPORT))
    ks = np.arange(-kmax, kmax + 1)
    # integer boxes sit on grid points when 1/dxi is an integer, and then one
    # evaluation of the base window serves every translate
    on_grid = abs(1 / grid.dxi - round(1 / grid.dxi)) < 1e-9
    if on_grid:
        half = int(np.ceil(SUPPORT / grid.dxi))
        offs = np.arange(-half, half + 1)
        shared = base_window(offs * grid.dxi)
        fat_half = int(np.ceil(FAT_SUPPORT / grid.dxi))
        fat_offs = np.arange(-fat_half, fat_half + 1)
        fat_shared = fattened_window(fat_offs * grid.dxi)
    raw = {}
    for k in ks:
        if on_grid:
            idx = grid.index_of(k) + offs
            ok = (idx >= 0) & (idx < grid.M)
            if ok.any():
                raw[int(k)] = (idx[ok], shared[ok])
        else:
            idx = np.flatnonzero(np.abs(xi - k) < SUPPORT)
            if idx.size:
                raw[int(k)] = (idx, base_window(xi[idx] - k))
    total = np.zeros(grid.M)
    for idx, v in raw.values():
        total[idx] += v
    start, values = {}, {}
    for k, (idx, v) in raw.items():
        keep = v > 0
        idx, v = idx[keep], v[keep] / total[idx[keep]]
        if idx.size:
            start[k], values[k] = int(idx[0]), v
    fat_start, fat_values = {}, {}
    for k in start:
        if on_grid:
            idx = grid.index_of(k) + fat_offs
            v = fat_shared.copy()
            ok = (idx >= 0) & (idx < grid.M)
            idx, v = idx[ok], v[ok]
        else:
            idx = np.flatnonzero(np.abs(xi - k) < FAT_SUPPORT)
            v = fattened_window(xi[idx] - k)
        keep = v > 0
        fat_start[k], fat_values[k] = int(idx[keep][0]), v[keep]
    count = np.zeros(grid.M, dtype=int)
    for k in start:
        count[start[k] : start[k] + len(values[k])] += 1
    q0 = values[0][np.abs(xi[start[0] : start[0] + len(values[0])]) <= 0.5]
    wf = WindowFamily(
        grid=grid,
        ks=np.array(sorted(start)),
        start=start,
        values=values,
        fat_start=fat_start,
        fat_values=fat_values,
        lower_bound=float(q0.min()),
        overlap=int(count.max()),
    )
    _FAMILIES[grid] = wf
    return wf


def box_project(f: Field, k: int, fattened: bool = False) -> Field:
    f.grid.check_resolved(k)
    wf = build_windows(f.grid)
    return Field.from_spectrum(f.grid, wf.apply(f.spectrum, k, fattened))


def box_pieces(f: Field, ks=None) -> dict[int, Field]:
    wf = build_windows(f.grid)
    ks = wf.resolved if ks is None else ks
    return {int(k): Field.from_spectrum(f.grid, wf.apply(f.spectrum, k)) for k in ks}


def unresolved_fraction(f: Field) -> float:
    """Share of the L^2 energy outside the region tiled by resolved windows."""
    K = f.grid.max_resolved_box
    e = np.abs(f.spectrum) ** 2
    tot = e.sum()
    if tot == 0:
        return 0.0
    return float(e[np.abs(f.grid.xi) > K + 0.25].sum() / tot)


def box_lp_norms(f: Field, p: float, ks=None) -> tuple[np.ndarray, np.ndarray]:
    """Return (ks, ||box_k f||_p) over the resolved boxes."""
    wf = build_windows(f.grid)
    ks = np.array(list(wf.resolved if ks is None else ks))
    spec = f.spectrum
    pieces = np.zeros((len(ks), f.grid.M), dtype=complex)
    for row, k in enumerate(ks):
        i0, v = wf.local(int(k))
        pieces[row, i0 : i0 + len(v)] = spec[i0 : i0 + len(v)] * v
    phys = samples_from_spectrum(pieces, f.grid.L)
    norms = np.array([lp_norm(r, f.grid.dx, p) for r in phys])
    return ks, norms


def _lq(terms: np.ndarray, q: float) -> float:
    if np.isinf(q):
        return float(terms.max(initial=0.0))
    return float(np.sum(terms**q) ** (1.0 / q))


def modulation_norm(f: Field, params: ModParams, leakage_tol: float = 1e-10) -> float:
    leak = unresolved_fraction(f)
    if leak > leakage_tol:
        raise ValueError(f"field has {leak:.3e} of its energy outside the resolved boxes")
    ks, norms = box_lp_norms(f, params.p)
    return _lq(japanese(ks) ** params.s * norms, params.q)


def box_table(f: Field, params: ModParams) -> list[tuple[int, float, float, float]]:
    """Per-box rows (k, ||box_k f||_p, <k>^s, contribution to the q-sum)."""
    ks, norms = box_lp_norms(f, params.p)
    w = japanese(ks) ** params.s
    contrib = w * norms if np.isinf(params.q) else (w * norms) ** params.q
    return [(int(k), float(n), float(a), float(c)) for k, n, a, c in zip(ks, norms, w, contrib)]


def frame_constants(grid: GridSpec) -> tuple[float, float]:
    """Bounds (C1, C2) with C1 ||f||_2 <= ||f||_{M_{2,2}} <= C2 ||f||_2.

    Taken as square roots of the extremes of sum_k sigma_k^2 over the
    grid frequencies tiled by resolved windows.
    """
    wf = build_windows(grid)
    sq = np.zeros(grid.M)
    for k in wf.resolved:
        i0, v = wf.local(k)
        sq[i0 : i0 + len(v)] += v**2
    K = grid.max_resolved_box
    inside = np.abs(grid.xi) <= K + 0.25
    return float(np.sqrt(sq[inside].min())), float(np.sqrt(sq[inside].max()))


def cutoff_symbol(xi: np.ndarray, cutoff: float) -> np.ndarray:
    a = np.abs(np.asarray(xi, dtype=float))
    return 1 - smooth_step(2 * (a - cutoff) - 1)


def fourier_cutoff(f: Field, cutoff: float) -> Field:
    """Smooth Fourier truncation: 1 on [-N, N], 0 outside [-N-1, N+1]."""
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    xi = f.grid.xi
    m = np.ones(f.grid.M)
    ramp = (np.abs(xi) > cutoff) & (np.abs(xi) < cutoff + 1)
    m[np.abs(xi) >= cutoff + 1] = 0.0
    m[ramp] = cutoff_symbol(xi[ramp], cutoff)
    return Field.from_spectrum(f.grid, m * f.spectrum)


def nesting_check(f: Field, k: int, p1: float, p2: float) -> float:
    """||box_k f||_{p2} / ||box_k f||_{p1}; zero pieces raise."""
    if p1 > p2:
        raise ValueError("need p1 <= p2")
    piece = box_project(f, k)
    den = piece.lp(p1)
    if den == 0:
        raise ZeroDivisionError(f"box {k} of the field is zero")
    return piece.lp(p2) / den
