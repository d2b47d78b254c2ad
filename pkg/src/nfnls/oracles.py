"""Brute-force Fourier-side sums used as independent references.

Nothing here goes through the doubled-grid products or the batched kernel
of the package; every sum is written out over grid frequencies.
"""

import numpy as np

from .modulation import build_windows


def q1_direct(grid, n, v1, v2, v3, t):
    """sigma_n(xi) / L^2 sum_{xi1, xi3} e^{-2it(xi-xi1)(xi-xi3)} v1^(xi1) conj(v2^(xi1+xi3-xi)) v3^(xi3)."""
    M, xi, L = grid.M, grid.xi, grid.L
    sig = build_windows(grid).sigma(n)
    a1, a2, a3 = v1.spectrum, v2.spectrum, v3.spectrum
    out = np.zeros(M, dtype=complex)
    i1 = np.arange(M)[:, None]
    i3 = np.arange(M)[None, :]
    for i in np.flatnonzero(sig):
        j = i1 + i3 - i
        ok = (j >= 0) & (j < M)
        g = np.where(ok, np.conj(a2[np.clip(j, 0, M - 1)]), 0)
        ph = np.exp(-2j * t * (xi[i] - xi[i1]) * (xi[i] - xi[i3]))
        out[i] = sig[i] * np.sum(ph * a1[i1] * g * a3[i3]) / L**2
    return out


def r1_direct(grid, n, boxes, u1, u2, u3):
    """Division kernel with fattened masks, triple loop over frequencies."""
    M, xi, L = grid.M, grid.xi, grid.L
    wf = build_windows(grid)
    s = [wf.sigma(k, fattened=True) * f.spectrum for k, f in zip(boxes, (u1, u2, u3))]
    sig = wf.sigma(n)
    out = np.zeros(M, dtype=complex)
    for i in np.flatnonzero(sig):
        acc = 0j
        for a in np.flatnonzero(s[0]):
            for b in np.flatnonzero(s[2]):
                j = a + b - i
                if 0 <= j < M:
                    acc += s[0][a] * np.conj(s[1][j]) * s[2][b] / ((xi[i] - xi[a]) * (xi[i] - xi[b]))
        out[i] = sig[i] * acc / L**2
    return out


def r2_direct(grid, slot, boxes, leaves):
    """Second-generation kernel grown at root slot ``slot`` (0, 1 or 2).

    ``boxes`` = (n, n1, n2, n3, m1, m2, m3) with (m1, m2, m3) the children of
    the grown slot; ``leaves`` are the five leaf fields in tree order
    (outer slots left to right with the grown slot's three children in
    place of it).  Frequencies below are the unconjugated box frequencies.
    """
    M, xi, L = grid.M, grid.xi, grid.L
    wf = build_windows(grid)
    n, n1, n2, n3, m1, m2, m3 = boxes
    outer = [n1, n2, n3]
    leaf_boxes = outer[:slot] + [m1, m2, m3] + outer[slot + 1 :]
    spec = [wf.sigma(k, fattened=True) * f.spectrum for k, f in zip(leaf_boxes, leaves)]
    fs = [1, -1, 1]
    leaf_sign = fs[:slot] + [fs[slot] * s for s in (1, -1, 1)] + fs[slot + 1 :]
    sup = [np.flatnonzero(s) for s in spec]
    sig_n, sig_g = wf.sigma(n), wf.sigma(outer[slot])
    out = np.zeros(M, dtype=complex)
    m0 = M // 2
    for i in np.flatnonzero(sig_n):
        grids = np.meshgrid(*[sup[k] - m0 for k in range(4)], indexing="ij", sparse=True)
        acc = (i - m0) - sum(leaf_sign[k] * grids[k] for k in range(4))
        m_last = leaf_sign[4] * acc
        ok = (m_last + m0 >= 0) & (m_last + m0 < M)
        m = list(grids) + [m_last]
        # frequencies of the three children of the grown node, unconjugated
        c = [m[slot], m[slot + 1], m[slot + 2]]
        g = c[0] - c[1] + c[2]
        kids = [m[k] for k in range(5)]
        top = kids[:slot] + [g] + kids[slot + 3 :]
        w = i - m0
        mu_r = (w - top[0]) * (w - top[2]) * grid.dxi**2
        mu_g = (g - c[0]) * (g - c[2]) * grid.dxi**2
        den = mu_r * (mu_r + fs[slot] * mu_g)
        val = np.ones(1, dtype=complex)
        for k in range(5):
            idx = np.clip(m[k] + m0, 0, M - 1)
            x = np.where(ok, spec[k][idx], 0) if k == 4 else spec[k][idx]
            val = val * (np.conj(x) if leaf_sign[k] < 0 else x)
        gi = np.clip(g + m0, 0, M - 1)
        val = val * np.where((g + m0 >= 0) & (g + m0 < M), sig_g[gi], 0.0)
        nz = val != 0
        out[i] = sig_n[i] * np.sum(np.where(nz, val / np.where(den == 0, 1, den), 0)) / L**4
    return out
