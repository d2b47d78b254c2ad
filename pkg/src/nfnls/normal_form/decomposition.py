"""Splitting the first-generation triple sum of one box.

With slack 2 every triple that can reach box n is enumerated, and the
closed forms below are exact::

    R2 = sum over n1 ~ n  +  sum over n3 ~ n  = box_n [2 U_n |u|^2]
    R1 = sum over n1 ~ n and n3 ~ n          = box_n [U_n^2 conj(u)]
    N1 = nonresonant triples                 = box_n [(u - U_n)^2 conj(u)]

where ``u`` is the sum of all pieces and ``U_n`` the sum over the three
boxes within one of n (all in the Schrodinger picture, then pulled back).
``a ~ b`` means ``|a - b| <= 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..grid import Field
from ..resonance import phase_array, resonant_mask, triple_array
from .operators import BoxSequence, fine_samples, project_product, propagate

DYNAMIC_SLACK = 2


@dataclass
class PictureState:
    """Pieces of ``v`` moved to the Schrodinger picture at time ``t``.

    Keeps both the spectra and the doubled-grid samples.
    """

    v: BoxSequence
    t: float
    u_spec: dict = field(init=False)
    u_fine: dict = field(init=False)

    def __post_init__(self):
        g = self.v.grid
        self.u_spec = {k: propagate(p.spectrum, g.xi, -self.t) for k, p in self.v.pieces.items()}
        self.u_fine = {k: fine_samples(s, g) for k, s in self.u_spec.items()}
        self._total = sum(self.u_fine.values())
        self._stack = np.stack([self.u_fine[k] for k in self.v.boxes])

    @property
    def grid(self):
        return self.v.grid

    @property
    def total(self) -> np.ndarray:
        return self._total

    def near(self, n: int) -> np.ndarray:
        return sum(self.u_fine[k] for k in (n - 1, n, n + 1) if k in self.u_fine)

    def project(self, prod: np.ndarray, n: int) -> Field:
        return Field.from_spectrum(self.grid, project_product(prod, self.grid, n, self.t))

    def triple_products(self, trip: np.ndarray) -> np.ndarray:
        """Rows u_{n1} conj(u_{n2}) u_{n3} on the doubled grid."""
        K = self.v.K
        a = self._stack
        return a[trip[:, 0] + K] * np.conj(a[trip[:, 1] + K]) * a[trip[:, 2] + K]


def _state(v, t) -> PictureState:
    return v if isinstance(v, PictureState) else PictureState(v, t)


def resonant_parts(v, n: int, t: float = 0.0) -> tuple[Field, Field]:
    """(R1, R2) for box n from the closed forms."""
    st = _state(v, t)
    U, u = st.near(n), st.total
    r2 = st.project(2 * U * np.abs(u) ** 2, n)
    r1 = st.project(U * U * np.conj(u), n)
    return r1, r2


def nonresonant_part(v, n: int, t: float = 0.0) -> Field:
    st = _state(v, t)
    w = st.total - st.near(n)
    return st.project(w * w * np.conj(st.total), n)


def full_part(v, n: int, t: float = 0.0) -> Field:
    """box_n of |u|^2 u pulled back: the whole triple sum in one product."""
    st = _state(v, t)
    u = st.total
    return st.project(np.abs(u) ** 2 * u, n)


def class_sums(v, n: int, t: float = 0.0, N: float = 1.0, slack: int = DYNAMIC_SLACK) -> dict[str, Field]:
    """Triple sums by class, computed by explicit enumeration.

    Keys: ``all``, ``R1``, ``R2``, ``N11`` (|phase| <= N), ``N12``.
    """
    st = _state(v, t)
    trip = triple_array(n, st.v.K, slack)
    r1m = (np.abs(trip[:, 0] - n) <= 1) & (np.abs(trip[:, 2] - n) <= 1)
    res = resonant_mask(n, trip)
    phi = phase_array(n, trip)
    inA = ~res & (np.abs(phi) <= N)
    outA = ~res & ~inA
    w2 = (np.abs(trip[:, 0] - n) <= 1).astype(float) + (np.abs(trip[:, 2] - n) <= 1)

    W = np.stack([np.ones(len(trip)), r1m, w2, inA, outA]).astype(float)
    acc = np.zeros((len(W), st.u_fine[n].size), dtype=complex)
    # chunks keep the product rows to about 32 MB
    step = max(1, 2_000_000 // acc.shape[1])
    for lo in range(0, len(trip), step):
        acc += W[:, lo : lo + step] @ st.triple_products(trip[lo : lo + step])
    return {key: st.project(row, n) for key, row in zip(("all", "R1", "R2", "N11", "N12"), acc)}


def N1_split(v, n: int, t: float = 0.0, N: float = 1.0, slack: int = DYNAMIC_SLACK) -> tuple[Field, Field]:
    """(N11, N12): nonresonant triples with |phase| <= N and > N."""
    cs = class_sums(v, n, t, N, slack)
    return cs["N11"], cs["N12"]
