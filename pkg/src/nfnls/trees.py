"""Ordered ternary trees, chronicles and index functions.

A node is a tuple path from the root: ``()`` is the root and ``p + (i,)``
is child ``i`` of ``p`` with 0, 1, 2 for left, middle, right.  A chronicle
is the tuple of nodes expanded at generations 1..J; the first entry is
always the root.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal, localcontext
from functools import cached_property
from typing import Iterator

from .resonance import PhaseData

Node = tuple

MAX_J = 7


def children(a: Node) -> tuple[Node, Node, Node]:
    return (a + (0,), a + (1,), a + (2,))


def psgn(a: Node) -> int:
    return -1 if a and a[-1] == 1 else 1


def fsgn(a: Node) -> int:
    # every middle step on the way down flips the sign, including the last
    return -1 if sum(1 for s in a if s == 1) % 2 else 1


def middle_predecessors(a: Node) -> int:
    return sum(1 for s in a[:-1] if s == 1)


def is_descendant(b: Node, a: Node) -> bool:
    """True if b lies strictly below a."""
    return len(b) > len(a) and b[: len(a)] == a


@dataclass(frozen=True)
class Chronicle:
    events: tuple[Node, ...]

    def __post_init__(self):
        if not self.events or self.events[0] != ():
            raise ValueError("a chronicle starts by expanding the root")
        terminal = {()}
        for j, a in enumerate(self.events):
            if a not in terminal:
                raise ValueError(f"event {j + 1} expands {a}, which is not terminal")
            terminal.remove(a)
            terminal.update(children(a))

    @property
    def J(self) -> int:
        return len(self.events)

    @cached_property
    def nonterminal(self) -> tuple[Node, ...]:
        return self.events

    @cached_property
    def nodes(self) -> tuple[Node, ...]:
        out = {()}
        for a in self.events:
            out.update(children(a))
        return tuple(sorted(out, key=lambda p: (len(p), p)))

    @cached_property
    def terminal(self) -> tuple[Node, ...]:
        inner = set(self.events)
        return tuple(sorted((a for a in self.nodes if a not in inner), key=lambda p: (len(p), p)))

    def generation(self, a: Node) -> int:
        return self.events.index(a) + 1

    def parent_generation(self, a: Node) -> int:
        """Generation at which ``a`` came into existence (0 for the root)."""
        return 0 if a == () else self.generation(a[:-1])

    def descendants(self, a: Node) -> tuple[Node, ...]:
        return tuple(b for b in self.nodes if is_descendant(b, a))

    def check(self) -> None:
        j = self.J
        if len(self.nodes) != 3 * j + 1 or len(self.terminal) != 2 * j + 1 or len(self.nonterminal) != j:
            raise AssertionError(f"bad node counts for {self.events}")


def _grow(prefix: tuple, terminal: list, J: int) -> Iterator[tuple]:
    if len(prefix) == J:
        yield prefix
        return
    for a in sorted(terminal):
        rest = [b for b in terminal if b != a] + list(children(a))
        yield from _grow(prefix + (a,), rest, J)


def enumerate_chronicles(J: int) -> list[Chronicle]:
    if not 1 <= J <= MAX_J:
        raise ValueError(f"J must lie in 1..{MAX_J}, got {J}")
    return [Chronicle(ev) for ev in _grow(((),), list(children(())), J)]


@dataclass(frozen=True)
class SignMaps:
    psgn: dict
    fsgn: dict


def signs(ch: Chronicle) -> SignMaps:
    return SignMaps({a: psgn(a) for a in ch.nodes}, {a: fsgn(a) for a in ch.nodes})


# --- index functions -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class IndexAssignment:
    chronicle: Chronicle
    values: dict  # node -> integer frequency
    slack: int = 1

    def __getitem__(self, a: Node) -> int:
        return self.values[a]

    def generation_tuple(self, j: int) -> tuple[int, int, int, int]:
        a = self.chronicle.events[j - 1]
        return (self.values[a],) + tuple(self.values[c] for c in children(a))

    @property
    def root(self) -> int:
        return self.values[()]

    def leaves(self) -> tuple[int, ...]:
        return tuple(self.values[b] for b in self.chronicle.terminal)

    def violations(self, N: float = 0) -> list[str]:
        out = []
        for a in self.chronicle.events:
            n, n1, n2, n3 = (self.values[a],) + tuple(self.values[c] for c in children(a))
            if abs(n1 - n2 + n3 - n) > self.slack:
                out.append(f"node {a}: {n1}-{n2}+{n3} not within {self.slack} of {n}")
            if abs(n1 - n) <= 1 or abs(n3 - n) <= 1:
                out.append(f"node {a}: resonant children")
        mu1 = 2 * (self.values[()] - self.values[(0,)]) * (self.values[()] - self.values[(2,)])
        if not abs(mu1) > N:
            out.append(f"|mu_1| = {abs(mu1)} is not above N = {N}")
        return out

    def is_valid(self, N: float = 0) -> bool:
        return not self.violations(N)


def _child_choices(n: int, K: int, slack: int):
    for n1 in range(-K, K + 1):
        if abs(n1 - n) <= 1:
            continue
        for n3 in range(-K, K + 1):
            if abs(n3 - n) <= 1:
                continue
            for e in range(-slack, slack + 1):
                n2 = n1 + n3 - n - e
                if abs(n2) <= K:
                    yield n1, n2, n3


def enumerate_index_assignments(
    ch: Chronicle,
    K: int,
    N: float = 0,
    slack: int = 1,
    root: int | None = None,
    band=None,
) -> Iterator[IndexAssignment]:
    """Stream every valid index function with all frequencies in [-K, K].

    The root frequency sweeps [-K, K] unless ``root`` fixes it.  Children
    are ordered by (n1, n3, slack), which makes the stream deterministic.
    """
    if band is not None:
        kmax = band if isinstance(band, int) else band.max_resolved_box
        if K > kmax:
            raise ValueError(f"cutoff K={K} exceeds the resolved band |k| <= {kmax}")
    roots = range(-K, K + 1) if root is None else [root]
    events = ch.events

    def rec(j: int, values: dict):
        if j == len(events):
            yield IndexAssignment(ch, dict(values), slack)
            return
        a = events[j]
        n = values[a]
        for n1, n2, n3 in _child_choices(n, K, slack):
            if j == 0 and not abs(2 * (n - n1) * (n - n3)) > N:
                continue
            c = children(a)
            values[c[0]], values[c[1]], values[c[2]] = n1, n2, n3
            yield from rec(j + 1, values)
        for x in children(a):
            values.pop(x, None)

    for r in roots:
        yield from rec(0, {(): r})


def count_index_assignments(ch: Chronicle, K: int, N: float = 0, slack: int = 1, root=None) -> int:
    return sum(1 for _ in enumerate_index_assignments(ch, K, N, slack, root))


# --- phase data -----------------------------------------------------------------


@dataclass(frozen=True)
class TreePhase:
    generation: PhaseData  # mu_j in chronicle order
    node_mu: dict  # nonterminal node -> mu at that node
    node_mu_tilde: dict  # sum of mu over nonterminals not strictly below the node
    node_mu_tilde_signed: dict  # same sum weighted by fsgn

    @property
    def mu_hat_T(self) -> int:
        return math.prod(self.node_mu_tilde.values())

    @property
    def mu_hat_T_signed(self) -> int:
        return math.prod(self.node_mu_tilde_signed.values())

    @property
    def ratio_to_chronicle(self) -> float:
        """mu_hat_T / mu_hat_J; equal to 1 whenever the two orderings agree."""
        return self.mu_hat_T / self.generation.mu_hat


def node_phase(values: dict, a: Node) -> int:
    n = values[a]
    c = children(a)
    return 2 * (n - values[c[0]]) * (n - values[c[2]])


def phase_data(asg: IndexAssignment) -> TreePhase:
    ch = asg.chronicle
    mus = tuple(node_phase(asg.values, a) for a in ch.events)
    node_mu = dict(zip(ch.events, mus))
    tilde, signed = {}, {}
    for a in ch.events:
        keep = [b for b in ch.events if not is_descendant(b, a)]
        tilde[a] = sum(node_mu[b] for b in keep)
        signed[a] = sum(fsgn(b) * node_mu[b] for b in keep)
    return TreePhase(PhaseData(mus), node_mu, tilde, signed)


# --- constants ------------------------------------------------------------------


@dataclass(frozen=True)
class CombinatoricConstants:
    J: int
    c_J: int
    d_J: Decimal
    A: float


def double_factorial_odd(J: int) -> int:
    return math.prod(range(1, 2 * J, 2))


def constants(J: int, A: float = 1.1) -> CombinatoricConstants:
    if J < 1:
        raise ValueError("J must be at least 1")
    if not A > 1:
        raise ValueError("A must exceed 1")
    with localcontext() as ctx:
        ctx.prec = 40
        a = Decimal(repr(float(A)))
        log_d = a * Decimal(math.factorial(J + 1)).ln() + Decimal(3 * J) / 2 * Decimal(J).ln()
        d = log_d.exp()
    return CombinatoricConstants(J, double_factorial_odd(J), d, A)


def dump(ch: Chronicle) -> str:
    """Plain-text description of a chronicle and its sign maps."""
    sm = signs(ch)
    lines = [f"chronicle events={list(ch.events)}"]
    for a in ch.nodes:
        kind = "internal" if a in ch.events else "leaf"
        lines.append(f"  node={list(a)} {kind} psgn={sm.psgn[a]:+d} fsgn={sm.fsgn[a]:+d}")
    return "\n".join(lines)
