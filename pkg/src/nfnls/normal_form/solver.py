"""Partial-sum operator, its fixed point, and remainder evaluation.

In the interaction picture the truncated system is

    d/dt v_n = i lam sum_{triples} Q1_n = i lam [(R2 - R1) + N11 + N12].

One differentiation by parts on the nonresonant triples with |phase| > N
turns N12 into d/dt N21 minus product-rule terms, where N21 sums Q1_tilde.
Substituting d/dt v_m = i lam X_m, with X_m = (R2 - R1 + N1)(m), into the
product-rule terms gives (lam^2 = 1, slot 2 is conjugate linear)

    v_n(t) = v_n(0) + i lam [N21(v(t)) - N21(v(0))]
           + int_0^t  i lam (R2 - R1 + N11)
                    + sum_{A_N^c} [Q1~(X_n1, v_n2, v_n3) - Q1~(v_n1, X_n2, v_n3) + Q1~(v_n1, v_n2, X_n3)].

Depth one keeps only the first line of the integrand and drops i lam N12.
Depth two keeps everything except the part of N1 inside X on the set C1^c
(child phase far from cancelling the root phase); that part is the
depth-two remainder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson

from ..grid import Field
from ..modulation import ModParams, build_windows, modulation_norm
from ..propagator import Trajectory
from ..resonance import in_C_J, phase_array, resonant_mask, triple_array
from .decomposition import DYNAMIC_SLACK, PictureState
from .operators import BoxSequence, kernel_sum, propagate


# --- parameters ---------------------------------------------------------------


@dataclass(frozen=True)
class ParamChoice:
    N: int
    T: float
    R: float
    R_tilde: float
    bracket: float
    checks: dict


def _n_exponent(qp: float) -> float:
    return 100 * qp / (99 * (qp - 1))


def t_bracket(N: float, R_tilde: float, qp: float) -> float:
    r2, r4 = R_tilde**2, R_tilde**4
    return (
        (1 + N ** (1 / qp)) * r2
        + 2 * N ** (1 / qp - 1) * r4
        + 2 * N ** ((199 - 100 * qp) / (100 * qp)) * r4
    )


def select_params(R: float, params: ModParams = ModParams(), C: float = 1.0, margin: float = 0.1) -> ParamChoice:
    """Threshold N and time T for data of size R in M_{p,q}.

    N = ceil((2 (4R)^2)^{100 q' / (99 (q' - 1))}) and T solves
    C T bracket(N) < 1/10 with the requested relative margin, capped below 1.
    """
    if not R > 0:
        raise ValueError("R must be positive")
    qp = params.q_prime
    if math.isinf(qp):
        raise ValueError("q = 1 is unsupported: the threshold exponent degenerates (q' = inf)")
    if qp == 1:
        raise ValueError("q = inf is unsupported: the threshold exponent is infinite (q' = 1)")
    Rt = 4 * R
    N = max(1, math.ceil((2 * Rt**2) ** _n_exponent(qp)))
    br = t_bracket(N, Rt, qp)
    T = min((1 - margin) / (10 * C * br), 0.99)
    checks = {
        "threshold": Rt**2 * N ** (99 * (1 - qp) / (100 * qp)),
        "time": C * T * br,
    }
    if not (checks["threshold"] <= 0.5 and checks["time"] < 0.1):
        raise AssertionError(f"parameter selection failed its own inequalities: {checks}")
    return ParamChoice(N, T, R, Rt, br, checks)


@dataclass(frozen=True)
class NormalFormConfig:
    K: int = 6
    J: int = 2
    N: float | None = None  # None: choose from the data
    T: float | None = None  # None: choose from the data
    nodes: int = 9
    sign: int = 1
    params: ModParams = ModParams()
    tol: float = 1e-12
    max_iter: int = 60
    C: float = 1.0
    budget: int = 5_000_000  # explicit correction terms per node

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be positive")
        if self.J not in (1, 2):
            raise ValueError(f"the partial-sum operator is implemented for J in (1, 2), got {self.J}")
        if self.N is not None and not self.N > 0:
            raise ValueError("N must be positive")
        if self.T is not None and not 0 < self.T < 1:
            raise ValueError("T must lie in (0, 1)")
        if self.nodes < 3 or self.nodes % 2 == 0:
            raise ValueError("the Simpson rule needs an odd node count >= 3")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")

    def resolve(self, v0: Field) -> "NormalFormConfig":
        """Fill in N and T from select_params where they are unset."""
        if self.N is not None and self.T is not None:
            return self
        R = modulation_norm(v0, self.params)
        if R == 0:
            return NormalFormConfig(**{**self.__dict__, "N": self.N or 1, "T": self.T or 0.5})
        pc = select_params(R, self.params, self.C)
        N = self.N if self.N is not None else pc.N
        T = self.T if self.T is not None else pc.T
        return NormalFormConfig(**{**self.__dict__, "N": N, "T": T})

    def times(self) -> np.ndarray:
        if self.T is None:
            raise ValueError("T is unset; call resolve() first")
        return np.linspace(0.0, self.T, self.nodes)


# --- static index sets ------------------------------------------------------------


@dataclass
class SplitTables:
    """Index sets for one (K, N) at the dynamic slack.

    ``A[n]``      nonresonant triples with |phase| <= N, grouped by (n1, n3)
    ``Ac[n]``     rows and phases of the nonresonant triples with |phase| > N
    ``c1c[n]``    (row, slot, key) for the root triples whose slot has a
                  nonempty C1^c child set; ``keys[key]`` are child rows of box m
    """

    K: int
    N: float
    slack: int = DYNAMIC_SLACK
    A: dict = field(init=False)
    Ac: dict = field(init=False)
    nonres: dict = field(init=False)
    c1c: dict = field(init=False)
    keys: dict = field(init=False)

    def __post_init__(self):
        K = self.K
        self.A, self.Ac, self.nonres = {}, {}, {}
        for n in range(-K, K + 1):
            trip = triple_array(n, K, self.slack)
            trip = trip[~resonant_mask(n, trip)]
            phi = phase_array(n, trip)
            self.nonres[n] = (trip, phi)
            inA = np.abs(phi) <= self.N
            groups = {}
            for n1, n2, n3 in trip[inA].tolist():
                groups.setdefault((n1, n3), []).append(n2)
            self.A[n] = groups
            self.Ac[n] = (trip[~inA], phi[~inA])
        self._build_c1c()

    def _build_c1c(self):
        top = max(int(np.abs(p).max(initial=0)) for _, p in self.nonres.values())
        self.c1c, self.keys = {}, {}
        for n, (rows, phi) in self.Ac.items():
            entries = []
            # |mu1 +- mu2| can only exceed 125 |mu1|^0.99 if that is below |mu1| + top
            cand = np.flatnonzero(125 * np.abs(phi) ** 0.99 < np.abs(phi) + top)
            for r in cand:
                mu1 = int(phi[r])
                for slot, s in ((0, 1), (1, -1), (2, 1)):
                    m = int(rows[r, slot])
                    key = (m, mu1, s)
                    if key not in self.keys:
                        _, cphi = self.nonres[m]
                        out = [
                            i
                            for i, mu2 in enumerate(cphi.tolist())
                            if not in_C_J(mu1, mu1 + s * mu2, mu1, 1)
                        ]
                        self.keys[key] = np.array(out, dtype=int)
                    if self.keys[key].size:
                        entries.append((tuple(int(x) for x in rows[r]), slot, key))
            self.c1c[n] = entries

    @property
    def c1c_size(self) -> int:
        return sum(len(e) for e in self.c1c.values())


_TABLES: dict = {}


def tables_for(K: int, N: float) -> SplitTables:
    key = (K, float(N))
    if key not in _TABLES:
        _TABLES[key] = SplitTables(K, N)
    return _TABLES[key]


# --- one node ---------------------------------------------------------------------


@dataclass
class NodeTerms:
    """Per-box spectra (interaction picture) of every term at one time."""

    t: float
    res: dict
    full: dict  # X_n = R2 - R1 + N1
    n11: dict
    n21: dict = field(default_factory=dict)
    third: dict = field(default_factory=dict)  # slot-substituted sum over A_N^c with full X
    n32: dict = field(default_factory=dict)  # its C1^c part

    def n12(self, n):
        return self.full[n] - self.res[n] - self.n11[n]


def evaluate_node(v: BoxSequence, t: float, tab: SplitTables, depth: int = 2, budget: int = 5_000_000) -> NodeTerms:
    st = PictureState(v, t)
    grid, K = v.grid, v.K
    wf = build_windows(grid)
    xi = grid.xi
    boxes = list(v.boxes)
    u = np.stack([st.u_spec[k] for k in boxes])  # Schrodinger-picture pieces
    u_all = u.sum(axis=0)
    cube = st.total * np.abs(st.total) ** 2

    res, full, n11 = {}, {}, {}
    xu = {}
    for n in boxes:
        U = st.near(n)
        r1 = st.project(U * U * np.conj(st.total), n).spectrum
        r2 = st.project(2 * U * np.abs(st.total) ** 2, n).spectrum
        res[n] = r2 - r1
        full[n] = st.project(cube, n).spectrum
        xu[n] = propagate(full[n], xi, -t)
        groups = tab.A[n]
        if groups:
            rows = np.array([(a, b, c) for (a, c), bs in groups.items() for b in bs])
            prod = st.triple_products(rows).sum(axis=0)
            n11[n] = st.project(prod, n).spectrum
        else:
            n11[n] = np.zeros(grid.M, dtype=complex)
    terms = NodeTerms(t, res, full, n11)
    if depth < 2:
        return terms

    x_all = sum(xu.values())
    idx = {k: i for i, k in enumerate(boxes)}

    def far(arr_by_box, n):
        return sum(arr_by_box[k] for k in boxes if abs(k - n) >= 2)

    # C1^c child sums, in the Schrodinger picture of box m
    dsum = {}
    count = tab.c1c_size
    if count * 3 > budget:
        raise ValueError(f"C1^c corrections need {count} kernel terms per node, above the budget {budget}")
    for key in {e[2] for ents in tab.c1c.values() for e in ents}:
        m = key[0]
        rows = tab.nonres[m][0][tab.keys[key]]
        prod = st.triple_products(rows).sum(axis=0)
        dsum[key] = propagate(st.project(prod, m).spectrum, xi, -t)

    ubox = {k: u[idx[k]] for k in boxes}
    for n in boxes:
        uF = far(ubox, n)
        xF = far(xu, n)
        groups = tab.A[n]
        # boundary: aggregated nonresonant sum minus the A_N part
        S1 = [uF]
        S2 = [u_all]
        S3 = [uF]
        for (a, c), bs in groups.items():
            mid = sum(ubox[b] for b in bs)
            S1.append(-ubox[a])
            S2.append(mid)
            S3.append(ubox[c])
        b = kernel_sum(grid, n, np.array(S1), np.array(S2), np.array(S3))
        terms.n21[n] = 0.5j * propagate(b, xi, t)

        # slot substitution with the full X, aggregated, minus A_N
        S1 = [xF, -uF, uF]
        S2 = [u_all, x_all, u_all]
        S3 = [uF, uF, xF]
        for (a, c), bs in groups.items():
            mid_u = sum(ubox[bb] for bb in bs)
            mid_x = sum(xu[bb] for bb in bs)
            S1 += [-xu[a], ubox[a], -ubox[a]]
            S2 += [mid_u, mid_x, mid_u]
            S3 += [ubox[c], ubox[c], xu[c]]
        th = kernel_sum(grid, n, np.array(S1), np.array(S2), np.array(S3))
        terms.third[n] = 0.5j * propagate(th, xi, t)

        ents = tab.c1c.get(n, [])
        if ents:
            S1, S2, S3 = [], [], []
            for (a, bb, c), slot, key in ents:
                ins = [ubox[a], ubox[bb], ubox[c]]
                ins[slot] = dsum[key]
                if slot == 1:
                    ins[0] = -ins[0]
                S1.append(ins[0])
                S2.append(ins[1])
                S3.append(ins[2])
            r = kernel_sum(grid, n, np.array(S1), np.array(S2), np.array(S3))
            terms.n32[n] = 0.5j * propagate(r, xi, t)
        else:
            terms.n32[n] = np.zeros(grid.M, dtype=complex)
    return terms


# --- partial sums and fixed point ---------------------------------------------------


def _check_times(traj: Trajectory, config: NormalFormConfig) -> None:
    want = config.times()
    if len(traj) != len(want) or not np.allclose(traj.times, want, rtol=0, atol=1e-12):
        raise ValueError(
            f"trajectory nodes do not match the quadrature nodes ({len(traj)} vs {len(want)} on [0, {config.T}])"
        )


def _integrand(terms: NodeTerms, lam: int, depth: int, boxes) -> np.ndarray:
    rows = []
    for n in boxes:
        f = 1j * lam * (terms.res[n] + terms.n11[n])
        if depth >= 2:
            f = f + terms.third[n] - terms.n32[n]
        rows.append(f)
    return np.stack(rows)


def gamma_apply(v0: Field, traj: Trajectory, config: NormalFormConfig) -> Trajectory:
    """One application of the depth-J partial-sum operator on the node trajectory."""
    config = config.resolve(v0)
    _check_times(traj, config)
    K, lam, J = config.K, config.sign, config.J
    tab = tables_for(K, config.N)
    base = BoxSequence.from_field(v0, K)
    boxes = list(base.boxes)
    start = np.stack([base[n].spectrum for n in boxes])
    per_node = [evaluate_node(BoxSequence.from_field(f, K), t, tab, J, config.budget) for f, t in zip(traj.fields, traj.times)]
    y = np.stack([_integrand(tm, lam, J, boxes) for tm in per_node])
    # cumulative_simpson is real-only
    integral = cumulative_simpson(y.real, x=traj.times, axis=0, initial=0) + 1j * cumulative_simpson(
        y.imag, x=traj.times, axis=0, initial=0
    )
    out = []
    if J >= 2:
        b0 = evaluate_node(base, 0.0, tab, 2, config.budget)
        bnd0 = np.stack([1j * lam * b0.n21[n] for n in boxes])
    for i, tm in enumerate(per_node):
        val = start + integral[i]
        if J >= 2:
            val = val + np.stack([1j * lam * tm.n21[n] for n in boxes]) - bnd0
        out.append(Field.from_spectrum(v0.grid, val.sum(axis=0)))
    meta = {"operator": "gamma", "J": J, "N": config.N, "T": config.T, "K": K, "nodes": config.nodes}
    return Trajectory(traj.times.copy(), out, meta)


class ContractionFailure(RuntimeError):
    def __init__(self, msg, history):
        super().__init__(msg)
        self.history = history


@dataclass
class FixedPointResult:
    trajectory: Trajectory
    history: list  # (iteration, distance)
    config: NormalFormConfig

    @property
    def iterations(self) -> int:
        return len(self.history)


def trajectory_distance(a: Trajectory, b: Trajectory, params: ModParams) -> float:
    return max(modulation_norm(x - y, params) for x, y in zip(a.fields, b.fields))


def fixed_point_solve(v0: Field, config: NormalFormConfig) -> FixedPointResult:
    """Iterate v <- Gamma v from the constant trajectory v = v0."""
    config = config.resolve(v0)
    # truncate the data to the boxes the operator acts on
    v0 = BoxSequence.from_field(v0, config.K).to_field()
    times = config.times()
    cur = Trajectory(times, [v0] * len(times))
    history = []
    for it in range(1, config.max_iter + 1):
        nxt = gamma_apply(v0, cur, config)
        d = trajectory_distance(nxt, cur, config.params)
        history.append((it, d))
        cur = nxt
        if d < config.tol:
            cur.meta["iterations"] = it
            return FixedPointResult(cur, history, config)
        if not np.isfinite(d):
            break
    raise ContractionFailure(
        f"no contraction within {config.max_iter} iterations (N={config.N}, T={config.T}); "
        f"last distances {[f'{x:.3e}' for _, x in history[-5:]]}",
        history,
    )


# --- remainder and diagnostics ---------------------------------------------------------


@dataclass
class RemainderReport:
    J: int
    times: np.ndarray
    per_n: dict  # n -> sup over nodes of the M_{p,q} norm
    per_node: np.ndarray  # sup over n at each node
    value: float


def remainder_N2(traj: Trajectory, J: int, config: NormalFormConfig) -> RemainderReport:
    """The term dropped by the depth-J operator, sup over boxes and nodes.

    Depth one drops i lam N12.  Depth two drops the C1^c part of the
    slot-substituted sum.  Time derivatives of v enter only through the
    evolution law d/dt v_m = i lam X_m, never by differencing the nodes.
    """
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    if J not in (1, 2):
        raise ValueError("remainders are implemented for J in (1, 2)")
    if config.N is None:
        raise ValueError("remainder needs an explicit N")
    tab = tables_for(config.K, config.N)
    grid = traj.grid
    per_n = {n: 0.0 for n in range(-config.K, config.K + 1)}
    per_node = []
    for f, t in zip(traj.fields, traj.times):
        tm = evaluate_node(BoxSequence.from_field(f, config.K), t, tab, J, config.budget)
        worst = 0.0
        for n in per_n:
            spec = 1j * config.sign * tm.n12(n) if J == 1 else tm.n32[n]
            val = modulation_norm(Field.from_spectrum(grid, spec), config.params) if np.any(spec) else 0.0
            per_n[n] = max(per_n[n], val)
            worst = max(worst, val)
        per_node.append(worst)
    per_node = np.array(per_node)
    return RemainderReport(J, traj.times.copy(), per_n, per_node, float(per_node.max()))


def evolution_residual(traj: Trajectory, config: NormalFormConfig) -> np.ndarray:
    """Centered-difference d/dt v minus i lam X at interior nodes (M_{p,q} norms)."""
    K = config.K
    out = []
    for i in range(1, len(traj) - 1):
        h = traj.times[i + 1] - traj.times[i - 1]
        dv = (traj.fields[i + 1].spectrum - traj.fields[i - 1].spectrum) / h
        st = PictureState(BoxSequence.from_field(traj.fields[i], K), traj.times[i])
        rhs = sum(st.project(st.total * np.abs(st.total) ** 2, n).spectrum for n in range(-K, K + 1))
        out.append(modulation_norm(Field.from_spectrum(traj.grid, dv - 1j * config.sign * rhs), config.params))
    return np.array(out)


def cutoff_nonlinearity_probe(u: Trajectory, cutoffs) -> list[tuple[float, float]]:
    """Rows (cutoff, sup_t ||N(T_c u) - N(T_top u)||_2) for the smooth Fourier cutoff T_c."""
    from ..modulation import fourier_cutoff

    cutoffs = sorted(float(c) for c in cutoffs)
    if not cutoffs:
        return []
    top = cutoffs[-1]
    dx = u.grid.dx
    rows = []
    for c in cutoffs:
        worst = 0.0
        for f in u.fields:
            a = fourier_cutoff(f, c).samples
            b = fourier_cutoff(f, top).samples
            d = a * np.abs(a) ** 2 - b * np.abs(b) ** 2
            worst = max(worst, float(np.sqrt(np.sum(np.abs(d) ** 2) * dx)))
        rows.append((c, worst))
    return rows
