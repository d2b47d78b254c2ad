"""Phase function, resonance sets and divisor counting for frequency triples.

A triple ``(n1, n2, n3)`` feeds box ``n`` when ``n1 - n2 + n3 = n + e`` for
a small integer slack ``e``.  The default slack is 1, meaning "equal or off
by one".  Writing ``a = n1 - n`` and ``b = n3 - n`` the integer phase is::

    n^2 - n1^2 + n2^2 - n3^2 = 2 (a - e)(b - e) - e^2 - 2 e n

which reduces to ``2 (n - n1)(n - n3)`` when ``e = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

INT64_MAX = 2**63 - 1


def phase(xi, xi1, xi2, xi3):
    """xi^2 - xi1^2 + xi2^2 - xi3^2 in floating point."""
    return np.asarray(xi) ** 2 - np.asarray(xi1) ** 2 + np.asarray(xi2) ** 2 - np.asarray(xi3) ** 2


def phase_int(n: int, n1: int, n2: int, n3: int) -> int:
    """Exact integer phase, guarded against leaving the int64 range."""
    val = int(n) ** 2 - int(n1) ** 2 + int(n2) ** 2 - int(n3) ** 2
    if abs(val) > INT64_MAX:
        raise OverflowError(f"phase {val} does not fit in 64 bits")
    return val


def near(a: int, b: int, slack: int = 1) -> bool:
    return abs(a - b) <= slack


# --- divisors ----------------------------------------------------------------


def divisor_count(m: int) -> int:
    """Number of positive divisors of ``m`` by trial factorization."""
    m = int(m)
    if m <= 0:
        raise ValueError(f"divisor count needs a positive integer, got {m}")
    if m > 10**9:
        raise ValueError("divisor count is supported up to 1e9")
    count = 1
    p = 2
    while p * p <= m:
        e = 0
        while m % p == 0:
            m //= p
            e += 1
        count *= e + 1
        p += 1 if p == 2 else 2
    if m > 1:
        count *= 2
    return count


def divisor_table(limit: int) -> np.ndarray:
    """d(m) for m = 0..limit by a sieve (entry 0 is unused)."""
    d = np.zeros(limit + 1, dtype=np.int64)
    for i in range(1, limit + 1):
        d[i::i] += 1
    return d


def max_divisor_ratio(limit: int = 10**6, exponent: float = 0.3) -> tuple[float, int]:
    """Return (max d(m)/m^exponent, argmax) over 1 <= m <= limit."""
    d = divisor_table(limit)[1:]
    m = np.arange(1, limit + 1, dtype=float)
    r = d / m**exponent
    i = int(np.argmax(r))
    return float(r[i]), i + 1


# --- triples --------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class Triple:
    n: int
    n1: int
    n2: int
    n3: int
    slack: int = field(default=1, compare=False)

    def __post_init__(self):
        if abs(self.n1 - self.n2 + self.n3 - self.n) > self.slack:
            raise ValueError(f"{self.n1}-{self.n2}+{self.n3} is not within {self.slack} of {self.n}")

    @property
    def phi(self) -> int:
        return phase_int(self.n, self.n1, self.n2, self.n3)

    # the resonance test is always "within one", whatever the slack
    @property
    def resonant1(self) -> bool:
        return near(self.n1, self.n)

    @property
    def resonant3(self) -> bool:
        return near(self.n3, self.n)

    @property
    def resonant(self) -> bool:
        return self.resonant1 or self.resonant3

    @property
    def children(self) -> tuple[int, int, int]:
        return (self.n1, self.n2, self.n3)


def _check_band(K: int, band) -> None:
    if band is None:
        return
    kmax = band if isinstance(band, int) else band.max_resolved_box
    if K > kmax:
        raise ValueError(f"cutoff K={K} exceeds the resolved band |k| <= {kmax}")


def triple_array(n: int, K: int, slack: int = 1) -> np.ndarray:
    """All (n1, n2, n3) in [-K, K]^3 with n1 - n2 + n3 within ``slack`` of n.

    Rows are in lexicographic order.
    """
    r = np.arange(-K, K + 1)
    a1, a3 = np.meshgrid(r, r, indexing="ij")
    rows = []
    for e in range(-slack, slack + 1):
        n2 = a1 + a3 - n - e
        ok = np.abs(n2) <= K
        rows.append(np.stack([a1[ok], n2[ok], a3[ok]], axis=1))
    out = np.concatenate(rows)
    order = np.lexsort((out[:, 2], out[:, 1], out[:, 0]))
    return out[order]


def enumerate_triples(n: int, K: int, slack: int = 1, band=None) -> list[Triple]:
    if abs(n) > K:
        raise ValueError(f"|n|={abs(n)} exceeds the cutoff K={K}")
    _check_band(K, band)
    return [Triple(n, int(a), int(b), int(c), slack) for a, b, c in triple_array(n, K, slack)]


def phase_array(n: int, trip: np.ndarray) -> np.ndarray:
    t = trip.astype(np.int64)
    return n * n - t[:, 0] ** 2 + t[:, 1] ** 2 - t[:, 2] ** 2


def resonant_mask(n: int, trip: np.ndarray) -> np.ndarray:
    return (np.abs(trip[:, 0] - n) <= 1) | (np.abs(trip[:, 2] - n) <= 1)


def classify(t: Triple, N: float) -> str:
    if t.resonant:
        return "resonant"
    return "A_N" if abs(t.phi) <= N else "A_N^c"


def split_A_N(triples: Iterable[Triple], n: int, N: float) -> tuple[list[Triple], list[Triple]]:
    """Split nonresonant triples by |phase| <= N.  ``N = math.inf`` is allowed."""
    inside, outside = [], []
    for t in triples:
        if t.n != n:
            raise ValueError(f"triple {t} does not feed box {n}")
        if t.resonant:
            raise ValueError(f"resonant triple {t} passed to the A_N split")
        (inside if abs(t.phi) <= N else outside).append(t)
    return inside, outside


def in_C_J(mu_tilde_J: float, mu_tilde_next: float, mu1: float, J: int) -> bool:
    """Membership in the set controlling the (J+1)-th running phase."""
    if J < 1:
        raise ValueError("J must be at least 1")
    c = (2 * J + 3) ** 3
    a = abs(mu_tilde_next)
    return a <= c * abs(mu_tilde_J) ** 0.99 or a <= c * abs(mu1) ** 0.99


@dataclass(frozen=True)
class PhaseData:
    mus: tuple[int, ...]

    @property
    def mu_tilde(self) -> tuple[int, ...]:
        out, s = [], 0
        for m in self.mus:
            s += m
            out.append(s)
        return tuple(out)

    @property
    def mu_hat(self) -> int:
        return math.prod(self.mu_tilde)

    def consistent(self) -> bool:
        """Incremental product equals a from-scratch recomputation."""
        scratch = [sum(self.mus[: j + 1]) for j in range(len(self.mus))]
        return list(self.mu_tilde) == scratch and self.mu_hat == math.prod(scratch)


# --- counting -------------------------------------------------------------------


def triple_count_bound(n: int, mu: int, slack: int = 1) -> float:
    """Upper bound on #{nonresonant triples for box n with phase mu}.

    For each slack value e the phase fixes (a - e)(b - e), and the number
    of signed factorizations of an integer P != 0 is 2 d(|P|).  A zero
    product has unboundedly many factorizations and yields ``inf``.
    """
    total = 0
    for e in range(-slack, slack + 1):
        num = mu + e * e + 2 * e * n
        if num % 2:
            continue
        P = num // 2
        if P == 0:
            # with |e| <= 1 this needs a = e or b = e, which is resonant
            if abs(e) <= 1:
                continue
            return math.inf
        total += 2 * divisor_count(abs(P))
    return total


def triple_count_check(K: int, slack: int = 1, ns: Sequence[int] | None = None) -> dict:
    """Exhaustive comparison of phase multiplicities against the divisor bound."""
    ns = range(-K, K + 1) if ns is None else ns
    worst = 0.0
    checked = 0
    violations = []
    for n in ns:
        trip = triple_array(n, K, slack)
        trip = trip[~resonant_mask(n, trip)]
        phis = phase_array(n, trip)
        vals, counts = np.unique(phis, return_counts=True)
        for mu, c in zip(vals.tolist(), counts.tolist()):
            b = triple_count_bound(n, mu, slack)
            checked += 1
            if c > b:
                violations.append((n, mu, c, b))
            # also record the even-phase form 3 d(|mu|/2)
            if mu % 2 == 0 and mu != 0:
                worst = max(worst, c / (3 * divisor_count(abs(mu) // 2)))
    return {"checked": checked, "violations": violations, "max_ratio_even": worst}


def min_nonresonant_phase(K: int, slack: int = 1) -> int:
    best = None
    for n in range(-K, K + 1):
        trip = triple_array(n, K, slack)
        trip = trip[~resonant_mask(n, trip)]
        if len(trip):
            m = int(np.min(np.abs(phase_array(n, trip))))
            best = m if best is None else min(best, m)
    return best
