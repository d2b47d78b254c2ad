"""Multilinear operators of the first and later generations.

All operators act on spectra.  ``Q1`` forms the cubic product in physical
space on a grid twice as fine, which is an exact (alias free) evaluation of
the Fourier-side convolution for inputs band-limited to the original grid.
The division kernels have no product structure; for each output frequency
the double sum is a convolution, read off a padded product (``kernel_sum``).
Trees of depth two are summed directly over their leaves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ..grid import Field, GridSpec, samples_from_spectrum, spectrum_from_samples, truncate_spectrum
from ..modulation import box_pieces, build_windows
from ..trees import Chronicle, IndexAssignment, children, fsgn, is_descendant

# leakage allowed outside a fattened box before an input counts as mislocalized
LOCALIZATION_TOL = 1e-20


@dataclass
class BoxSequence:
    """Interaction-picture pieces v_n = box_n v for |n| <= K."""

    grid: GridSpec
    K: int
    pieces: dict

    @classmethod
    def from_field(cls, v: Field, K: int) -> "BoxSequence":
        v.grid.check_resolved(K)
        return cls(v.grid, K, box_pieces(v, range(-K, K + 1)))

    @classmethod
    def zeros(cls, grid: GridSpec, K: int) -> "BoxSequence":
        z = Field.zeros(grid)
        return cls(grid, K, {n: z for n in range(-K, K + 1)})

    def to_field(self) -> Field:
        return Field.from_spectrum(self.grid, sum(p.spectrum for p in self.pieces.values()))

    def __getitem__(self, n: int) -> Field:
        return self.pieces[n]

    @property
    def boxes(self) -> range:
        return range(-self.K, self.K + 1)


# --- helpers -------------------------------------------------------------------


def propagate(spec: np.ndarray, xi: np.ndarray, t: float) -> np.ndarray:
    """Spectrum of exp(i t d_x^2) f, i.e. multiplier exp(-i t xi^2)."""
    return spec if t == 0 else spec * np.exp(-1j * t * xi**2)


def fine_samples(spec: np.ndarray, grid: GridSpec) -> np.ndarray:
    return samples_from_spectrum(spec, grid.L, P=2 * grid.M)


def project_product(prod_fine: np.ndarray, grid: GridSpec, n: int, t: float) -> np.ndarray:
    """exp(i t d^2) box_n applied to a product sampled on the fine grid."""
    wf = build_windows(grid)
    spec = truncate_spectrum(spectrum_from_samples(prod_fine, grid.L), grid.M)
    return propagate(wf.apply(spec, n), grid.xi, t)


def check_localized(f: Field, k: int, what: str = "input") -> None:
    wf = build_windows(f.grid)
    e = np.abs(f.spectrum) ** 2
    tot = e.sum()
    if tot == 0:
        return
    sl = wf.support(k, fattened=True)
    # sum the outside directly; tot - inside cancels to roundoff
    outside = (e[: sl.start].sum() + e[sl.stop :].sum()) / tot
    if outside > LOCALIZATION_TOL:
        raise ValueError(f"{what} has {outside:.2e} of its energy outside the fattened box {k}")


def _check_boxes(fields, boxes):
    if boxes is None:
        return
    for i, (f, k) in enumerate(zip(fields, boxes)):
        check_localized(f, k, f"slot {i + 1}")


# --- first generation --------------------------------------------------------------


def Q1(n: int, v1: Field, v2: Field, v3: Field, t: float, boxes=None) -> Field:
    """exp(i t d^2) box_n [u1 conj(u2) u3] with u_j = exp(-i t d^2) v_j."""
    _check_boxes((v1, v2, v3), boxes)
    grid = v1.grid
    xi = grid.xi
    u = [fine_samples(propagate(f.spectrum, xi, -t), grid) for f in (v1, v2, v3)]
    prod = u[0] * np.conj(u[1]) * u[2]
    return Field.from_spectrum(grid, project_product(prod, grid, n, t))


def _local_support(spec: np.ndarray) -> np.ndarray:
    return np.flatnonzero(spec != 0)


def kernel_sum(
    grid: GridSpec,
    n: int,
    S1: np.ndarray,
    S2: np.ndarray,
    S3: np.ndarray,
    budget: int = 4_000_000,
) -> np.ndarray:
    """Sum over a batch of the division kernel at output box n.

    Each row b contributes::

        sigma_n(xi) / L^2 * sum_{xi1, xi3} S1[b](xi1) conj(S2[b](xi1 + xi3 - xi)) S3[b](xi3)
                            / ((xi - xi1)(xi - xi3))

    For a fixed output frequency the double sum is a triple convolution
    of S1/(xi - .), the reflected conjugate of S2, and S3/(xi - .), so it
    is read off a product on the doubled grid.  Inputs band-limited to the
    grid make this exact: nothing can wrap back onto the output box.
    """
    S1, S2, S3 = (np.atleast_2d(a) for a in (S1, S2, S3))
    M, xi, L = grid.M, grid.xi, grid.L
    wf = build_windows(grid)
    i0, sig = wf.local(n)
    I = np.arange(i0, i0 + len(sig))
    out = np.zeros(M, dtype=complex)
    if len(S1) == 0:
        return out
    if np.any(S1[:, I]) or np.any(S3[:, I]):
        raise ValueError(f"kernel denominator vanishes: an input overlaps the output box {n}")
    P = 2 * M
    d = xi[I][:, None] - xi[None, :]
    d[d == 0] = np.inf  # the matching entries of S1, S3 are zero (checked above)
    inv = 1.0 / d
    g = np.conj(samples_from_spectrum(S2, L, P=P))  # (B, P)
    cols = I + (P - M) // 2
    B = len(S1)
    rows = max(1, budget // (len(I) * P))
    acc = np.zeros(len(I), dtype=complex)
    for lo in range(0, B, rows):
        sl = slice(lo, lo + rows)
        f = samples_from_spectrum(S1[sl, None, :] * inv[None], L, P=P)
        h = samples_from_spectrum(S3[sl, None, :] * inv[None], L, P=P)
        spec = spectrum_from_samples((f * h * g[sl, None, :]).sum(axis=0), L)
        acc += spec[np.arange(len(I)), cols]
    out[I] = sig * acc
    return out


def trilinear_kernel(grid: GridSpec, n: int, s1, s2, s3) -> np.ndarray:
    """The division kernel for a single input triple (see ``kernel_sum``)."""
    return kernel_sum(grid, n, s1[None], s2[None], s3[None])


def R1_kernel(n: int, u1: Field, u2: Field, u3: Field, boxes=None) -> Field:
    """Time-independent division kernel with fattened-window masks on the inputs.

    ``boxes = (n1, n2, n3)`` enables the masks, the localization check and
    the rejection of resonant triples; without it the inputs are used as is.
    """
    grid = u1.grid
    s = [u1.spectrum, u2.spectrum, u3.spectrum]
    if boxes is not None:
        n1, n2, n3 = boxes
        if abs(n1 - n) <= 1 or abs(n3 - n) <= 1:
            raise ValueError(f"triple {boxes} is resonant for box {n}; the kernel is singular")
        _check_boxes((u1, u2, u3), boxes)
        wf = build_windows(grid)
        s = [wf.apply(si, k, fattened=True) for si, k in zip(s, boxes)]
    return Field.from_spectrum(grid, trilinear_kernel(grid, n, *s))


def Q1_tilde(n: int, v1: Field, v2: Field, v3: Field, t: float, boxes=None) -> Field:
    """Boundary term of differentiation by parts: Q1 = d/dt Q1_tilde - T1.

    Q1_tilde = (i/2) exp(i t d^2) R1(u1, u2, u3),  u_j = exp(-i t d^2) v_j.
    """
    grid = v1.grid
    xi = grid.xi
    u = [Field.from_spectrum(grid, propagate(f.spectrum, xi, -t)) for f in (v1, v2, v3)]
    r = R1_kernel(n, *u, boxes=boxes)
    return Field.from_spectrum(grid, 0.5j * propagate(r.spectrum, xi, t))


def T1(n: int, v: tuple, dv: tuple, t: float, boxes=None) -> Field:
    """Product-rule term: Q1_tilde with one slot replaced by its time derivative."""
    a = Q1_tilde(n, dv[0], v[1], v[2], t, boxes)
    b = Q1_tilde(n, v[0], dv[1], v[2], t, boxes)
    c = Q1_tilde(n, v[0], v[1], dv[2], t, boxes)
    return Field.from_spectrum(v[0].grid, a.spectrum + b.spectrum + c.spectrum)


# --- general generation ---------------------------------------------------------


def RJ_tree(
    ch: Chronicle,
    asg: IndexAssignment,
    leaves: Mapping,
    t: float | None = None,
    denominators: str = "tree",
    budget: float = 5e7,
) -> Field:
    """Tree operator of generation J acting on the leaf fields.

    Fourier side, for output frequency xi = sum_leaves fsgn(b) xi_b::

        prod_b sigma~_{n_b}(xi_b) * prod_{a internal} sigma_{n_a}(xi_a) / mu_hat * prod_b w_b^(fsgn b)

    where xi_a = fsgn(a) sum_{leaves below a} fsgn(b) xi_b is the (unconjugated)
    frequency carried by node a, leaves with fsgn = -1 enter conjugated, and
    mu_hat is the product over internal nodes of the fsgn-weighted phase
    sums.  Phases are the unscaled products (xi_a - xi_a1)(xi_a - xi_a3).
    ``denominators="tree"`` sums over internal nodes not strictly below a;
    ``"chronicle"`` sums over the nodes expanded up to a's generation.

    With ``t`` given the result is exp(i t d^2) R(exp(-i t d^2) w).
    """
    if denominators not in ("tree", "chronicle"):
        raise ValueError(f"unknown denominator rule {denominators!r}")
    leaf_nodes = ch.terminal
    first = next(iter(leaves.values()))
    grid = first.grid
    xi, M, L = grid.xi, grid.M, grid.L
    wf = build_windows(grid)
    specs = {}
    for b in leaf_nodes:
        if b not in leaves:
            raise KeyError(f"missing leaf field for node {b}")
        s = leaves[b].spectrum
        if t is not None:
            s = propagate(s, xi, -t)
        specs[b] = wf.apply(s, asg[b], fattened=True)

    # the last leaf is fixed by the output frequency; the others are free
    free, last = leaf_nodes[:-1], leaf_nodes[-1]
    sup = {b: _local_support(specs[b]) for b in leaf_nodes}
    if any(sup[b].size == 0 for b in leaf_nodes):
        return Field.zeros(grid)
    i0, sig_out = wf.local(asg.root)
    I = np.arange(i0, i0 + len(sig_out))
    size = len(I) * math.prod(sup[b].size for b in free)
    if size > budget:
        raise ValueError(f"direct tree sum needs {size:.2e} terms, above the budget {budget:.0e}")

    # integer frequency indices relative to the centre (xi = m * dxi)
    grids = np.meshgrid(I - M // 2, *[sup[b] - M // 2 for b in free], indexing="ij", sparse=True)
    m_out, m_free = grids[0], dict(zip(free, grids[1:]))
    m = dict(m_free)
    acc = m_out * 1
    for b in free:
        acc = acc - fsgn(b) * m_free[b]
    m[last] = fsgn(last) * acc
    idx_last = m[last] + M // 2
    ok = (idx_last >= 0) & (idx_last < M)

    def node_freq(a):
        if a in m:
            return m[a]
        total = 0
        for b in leaf_nodes:
            if is_descendant(b, a):
                total = total + fsgn(b) * m[b]
        return fsgn(a) * total

    freq = {}
    for a in ch.events:
        freq[a] = node_freq(a)
        for c in children(a):
            freq[c] = node_freq(c)
    dxi = grid.dxi
    mu = {}
    for a in ch.events:
        c = children(a)
        mu[a] = (freq[a] - freq[c[0]]) * (freq[a] - freq[c[2]]) * dxi**2
    den = 1.0
    for j, a in enumerate(ch.events):
        if denominators == "tree":
            keep = [b for b in ch.events if not is_descendant(b, a)]
        else:
            keep = ch.events[: j + 1]
        s = 0.0
        for b in keep:
            s = s + fsgn(b) * mu[b]
        den = den * s

    val = np.ones(1, dtype=complex)
    for b in free:
        w = specs[b][m[b] + M // 2]
        val = val * (np.conj(w) if fsgn(b) < 0 else w)
    wl = np.where(ok, specs[last][np.clip(idx_last, 0, M - 1)], 0)
    val = val * (np.conj(wl) if fsgn(last) < 0 else wl)
    for a in ch.events:
        if a == ():
            continue
        ia = freq[a] + M // 2
        inside = (ia >= 0) & (ia < M)
        sa = np.where(inside, wf.sigma(asg[a])[np.clip(ia, 0, M - 1)], 0.0)
        val = val * sa
    nz = val != 0
    if np.any(nz & (np.broadcast_to(den, nz.shape) == 0)):
        raise ValueError("a phase sum vanishes on the support of the tree operator")
    terms = np.where(nz, val / np.where(den == 0, 1, den), 0)
    out = np.zeros(M, dtype=complex)
    out[I] = sig_out * terms.reshape(len(I), -1).sum(axis=1)
    out /= L ** (2 * ch.J)
    if t is not None:
        out = propagate(out, xi, t)
    return Field.from_spectrum(grid, out)
