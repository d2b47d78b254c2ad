import math

import hypothesis as hyp
import hypothesis.strategies as hyp_st
import numpy as np
import numpy.testing as npt
import pytest

from nfnls.grid import Field, GridSpec, make_boxdata, make_gaussian
from nfnls.lab import rng_for
from nfnls.modulation import ModParams, build_windows, modulation_norm
from nfnls.normal_form import (
    BoxSequence,
    N1_split,
    NormalFormConfig,
    Q1,
    Q1_tilde,
    R1_kernel,
    RJ_tree,
    T1,
    class_sums,
    cutoff_nonlinearity_probe,
    evolution_residual,
    fixed_point_solve,
    full_part,
    gamma_apply,
    kernel_sum,
    nonresonant_part,
    remainder_N2,
    resonant_parts,
    select_params,
)
from nfnls.normal_form.solver import ContractionFailure, t_bracket
from nfnls.propagator import EvolutionParams, Trajectory, from_interaction, splitstep_solve
from nfnls.resonance import enumerate_triples, split_A_N
from nfnls.trees import Chronicle, IndexAssignment, children

from nfnls.oracles import q1_direct, r1_direct, r2_direct

TINY = GridSpec(L=16 * np.pi, M=64)


def box_field(grid, k, rng, fattened=False):
    """Random smooth field living in box k."""
    wf = build_windows(grid)
    f = make_boxdata(grid, {k: 1.0}, profile_halfwidth=0.6 if fattened else 0.25)
    noise = rng.standard_normal(grid.M) + 1j * rng.standard_normal(grid.M)
    spec = f.spectrum * (1 + 0.3 * noise)
    if fattened:
        spec = wf.apply(spec, k, fattened=True)
    return Field.from_spectrum(grid, spec)


def random_sequence(grid, K, rng, boxes=None):
    boxes = range(-K, K + 1) if boxes is None else boxes
    c = {k: complex(*rng.standard_normal(2)) for k in boxes}
    return BoxSequence.from_field(make_boxdata(grid, c), K)


def rel(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300)


# --- Q1 -----------------------------------------------------------------------


def test_q1_zero_input(rng):
    v = box_field(TINY, 1, rng)
    z = Field.zeros(TINY)
    assert not np.any(Q1(0, v, z, v, 0.2).spectrum)


@hyp.given(
    hyp_st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False),
    hyp_st.floats(0, 1),
)
@hyp.settings(max_examples=25, deadline=None)
def test_q1_linear_slots_and_conjugate_middle(a, t):
    rng = rng_for(3, "q1-lin")
    v1, v2, v3 = (box_field(TINY, k, rng) for k in (-2, 0, 2))
    base = Q1(0, v1, v2, v3, t).spectrum
    npt.assert_allclose(Q1(0, v1.scale(a), v2, v3, t).spectrum, a * base, atol=1e-14)
    npt.assert_allclose(Q1(0, v1, v2.scale(a), v3, t).spectrum, np.conj(a) * base, atol=1e-14)


def test_q1_matches_direct_sum(rng):
    for t in (0.0, 0.37):
        v = [box_field(TINY, k, rng) for k in (-2, 1, 2)]
        ours = Q1(-1, *v, t).spectrum
        npt.assert_array_less(rel(ours, q1_direct(TINY, -1, *v, t)), 1e-8)


def test_q1_rejects_spread_input(rng):
    v = box_field(TINY, 0, rng)
    wide = make_gaussian(TINY, 1.0, 0.5)
    with pytest.raises(ValueError, match="fattened box"):
        Q1(0, wide, v, v, 0.0, boxes=(0, 0, 0))


# --- resonant split ---------------------------------------------------------------


def test_single_box_has_no_nonresonant_part():
    g = GridSpec(L=16 * np.pi, M=256)
    v = BoxSequence.from_field(make_boxdata(g, {0: 0.7}), 3)
    r1, r2 = resonant_parts(v, 0, 0.2)
    assert np.max(np.abs(nonresonant_part(v, 0, 0.2).spectrum)) == 0
    npt.assert_allclose(r2.spectrum - r1.spectrum, full_part(v, 0, 0.2).spectrum, atol=1e-15)


def test_two_box_identity(rng):
    g = GridSpec(L=16 * np.pi, M=256)
    v = random_sequence(g, 4, rng, boxes=(-3, 2))
    scale = max(np.max(np.abs(full_part(v, n, 0.3).spectrum)) for n in range(-4, 5))
    for n in range(-4, 5):
        cs = class_sums(v, n, 0.3, N=2)
        r1, r2 = resonant_parts(v, n, 0.3)
        n1 = nonresonant_part(v, n, 0.3)
        lhs = r2.spectrum - r1.spectrum + n1.spectrum
        assert np.max(np.abs(lhs - cs["all"].spectrum)) < 1e-10 * scale


def test_zero_sequence_gives_zero():
    g = GridSpec(L=16 * np.pi, M=256)
    v = BoxSequence.zeros(g, 3)
    r1, r2 = resonant_parts(v, 1, 0.1)
    assert not np.any(r1.spectrum) and not np.any(r2.spectrum)


def test_n1_split_extremes(rng):
    g = GridSpec(L=16 * np.pi, M=256)
    v = random_sequence(g, 4, rng)
    n = 1
    n11, n12 = N1_split(v, n, 0.1, N=math.inf)
    assert not np.any(n12.spectrum)
    npt.assert_allclose(n11.spectrum, nonresonant_part(v, n, 0.1).spectrum, atol=1e-14)
    # N = 0 keeps only the phase-zero nonresonant triples
    n11, n12 = N1_split(v, n, 0.1, N=0)
    nonres = [t for t in enumerate_triples(n, 4, slack=2) if not t.resonant]
    zero, _ = split_A_N(nonres, n, 0)
    ref = sum(Q1(n, v[t.n1], v[t.n2], v[t.n3], 0.1).spectrum for t in zero)
    npt.assert_allclose(n11.spectrum, ref, atol=1e-14)
    npt.assert_allclose(n11.spectrum + n12.spectrum, nonresonant_part(v, n, 0.1).spectrum, atol=1e-12)


def test_class_sums_match_per_triple_q1(rng):
    g = GridSpec(L=16 * np.pi, M=256)
    v = random_sequence(g, 2, rng)
    n = 0
    cs = class_sums(v, n, 0.25, N=3)
    total = sum(Q1(n, v[t.n1], v[t.n2], v[t.n3], 0.25).spectrum for t in enumerate_triples(n, 2, slack=2))
    assert rel(cs["all"].spectrum, total) < 1e-12


# --- kernels ----------------------------------------------------------------------


def test_r1_kernel_zero_and_resonant(rng):
    u = [box_field(TINY, k, rng) for k in (-2, 0, 2)]
    z = Field.zeros(TINY)
    assert not np.any(R1_kernel(0, u[0], z, u[2], boxes=(-2, 0, 2)).spectrum)
    with pytest.raises(ValueError, match="resonant"):
        R1_kernel(0, u[0], u[1], u[1], boxes=(-2, 0, 1))


def test_r1_kernel_matches_direct_sum(rng):
    boxes = (1, 2, 1)
    u = [box_field(TINY, k, rng, fattened=True) for k in boxes]
    ours = R1_kernel(-1, *u, boxes=boxes).spectrum
    assert rel(ours, r1_direct(TINY, -1, boxes, *u)) < 1e-10


def test_kernel_sum_is_additive_over_the_batch(rng):
    g = GridSpec(L=16 * np.pi, M=128)
    rows = [[box_field(g, k, rng).spectrum for k in ks] for ks in ((-3, 0, 3), (2, 1, -2), (3, -1, -3))]
    S1, S2, S3 = (np.array([r[i] for r in rows]) for i in range(3))
    single = sum(kernel_sum(g, 0, S1[i : i + 1], S2[i : i + 1], S3[i : i + 1]) for i in range(3))
    npt.assert_allclose(kernel_sum(g, 0, S1, S2, S3), single, atol=1e-15)


def _dbp_residual(dt, t=0.3):
    rng = rng_for(11, "dbp")
    boxes = (-2, 1, 2)
    g = TINY
    w = [box_field(g, k, rng) for k in boxes]
    z = [box_field(g, k, rng) for k in boxes]
    v = lambda s: [Field.from_spectrum(g, a.spectrum + s * b.spectrum) for a, b in zip(w, z)]
    up = Q1_tilde(-1, *v(t + dt), t + dt).spectrum
    dn = Q1_tilde(-1, *v(t - dt), t - dt).spectrum
    lhs = (up - dn) / (2 * dt)
    rhs = Q1(-1, *v(t), t).spectrum + T1(-1, tuple(v(t)), tuple(z), t).spectrum
    return np.max(np.abs(lhs - rhs))


def test_differentiation_by_parts_is_second_order():
    errs = [_dbp_residual(dt) for dt in (1e-2, 5e-3, 2.5e-3)]
    slope = np.polyfit(np.log([1e-2, 5e-3, 2.5e-3]), np.log(errs), 1)[0]
    assert abs(slope - 2) < 0.3


def test_rj_tree_depth_one_is_r1(rng):
    boxes = (1, 2, 1)
    u = [box_field(TINY, k, rng, fattened=True) for k in boxes]
    ch = Chronicle(((),))
    asg = IndexAssignment(ch, {(): -1, (0,): 1, (1,): 2, (2,): 1})
    leaves = dict(zip(children(()), u))
    a = RJ_tree(ch, asg, leaves).spectrum
    b = R1_kernel(-1, *u, boxes=boxes).spectrum
    assert rel(a, b) < 1e-10


# (root, root children, children of the grown node); phase sums stay away from zero
DEPTH_TWO = {
    0: (-1, (1, 2, 1), (-1, -2, -1)),
    1: (0, (-2, 1, 2), (-1, -2, -1)),
    2: (-1, (1, 2, 1), (-1, -2, -1)),
}


@pytest.mark.parametrize("slot", [0, 1, 2])
def test_rj_tree_depth_two_matches_direct_sum(slot):
    rng = rng_for(5, f"rj2-{slot}")
    n, outer, kids = DEPTH_TWO[slot]
    g_node = (slot,)
    vals = {(): n, (0,): outer[0], (1,): outer[1], (2,): outer[2]}
    vals.update({g_node + (i,): k for i, k in enumerate(kids)})
    ch = Chronicle(((), g_node))
    asg = IndexAssignment(ch, vals, slack=2)
    assert asg.is_valid()
    fields = {b: box_field(TINY, vals[b], rng, fattened=True) for b in ch.terminal}
    ours = RJ_tree(ch, asg, fields).spectrum
    order = [(0,), (1,), (2,)]
    pos = order[:slot] + [g_node + (0,), g_node + (1,), g_node + (2,)] + order[slot + 1 :]
    ref = r2_direct(TINY, slot, (n, *outer, *kids), [fields[b] for b in pos])
    assert np.max(np.abs(ref)) > 0
    assert rel(ours, ref) < 1e-6


def test_rj_tree_is_multilinear(rng):
    ch = Chronicle(((), (2,)))
    vals = {(): -1, (0,): 1, (1,): 2, (2,): 1, (2, 0): -1, (2, 1): -2, (2, 2): -1}
    asg = IndexAssignment(ch, vals, slack=2)
    g = GridSpec(L=16 * np.pi, M=64)
    leaves = {b: box_field(g, vals[b], rng, fattened=True) for b in ch.terminal}
    base = RJ_tree(ch, asg, leaves).spectrum
    for b in ch.terminal:
        mod = dict(leaves)
        mod[b] = leaves[b].scale(2.0 + 1.0j)
        f = np.conj(2.0 + 1.0j) if sum(1 for s in b if s == 1) % 2 else 2.0 + 1.0j
        npt.assert_allclose(RJ_tree(ch, asg, mod).spectrum, f * base, atol=1e-15)


def test_rj_tree_budget_guard(rng):
    ch = Chronicle(((), (0,)))
    vals = {(): -1, (0,): 1, (1,): 2, (2,): 1, (0, 0): -1, (0, 1): -2, (0, 2): -1}
    g = GridSpec(L=16 * np.pi, M=64)
    leaves = {b: box_field(g, vals[b], rng, fattened=True) for b in ch.terminal}
    with pytest.raises(ValueError, match="budget"):
        RJ_tree(ch, IndexAssignment(ch, vals, slack=2), leaves, budget=10)


# --- partial sums ---------------------------------------------------------------------

MID = GridSpec(L=16 * np.pi, M=256)


def test_gamma_of_zero_is_zero():
    z = Field.zeros(MID)
    cfg = NormalFormConfig(K=4, N=1, T=0.01, nodes=3)
    out = gamma_apply(z, Trajectory(cfg.times(), [z] * 3), cfg)
    assert all(not np.any(f.spectrum) for f in out.fields)


def test_gamma_depth_one_starts_at_data():
    v0 = BoxSequence.from_field(make_gaussian(MID, 0.1, 2.0), 5).to_field()
    cfg = NormalFormConfig(K=5, J=1, N=2, T=0.02, nodes=5)
    out = gamma_apply(v0, Trajectory(cfg.times(), [v0] * 5), cfg)
    npt.assert_allclose(out.fields[0].spectrum, v0.spectrum, rtol=0, atol=1e-15)


def test_gamma_rejects_node_mismatch():
    v0 = make_gaussian(MID, 0.1, 2.0)
    cfg = NormalFormConfig(K=4, N=1, T=0.02, nodes=5)
    with pytest.raises(ValueError, match="quadrature nodes"):
        gamma_apply(v0, Trajectory(np.linspace(0, 0.02, 3), [v0] * 3), cfg)


def test_config_validation():
    with pytest.raises(ValueError):
        NormalFormConfig(nodes=4)
    with pytest.raises(ValueError):
        NormalFormConfig(J=3)
    with pytest.raises(ValueError):
        NormalFormConfig(N=0)


def test_fixed_point_of_zero_data():
    res = fixed_point_solve(Field.zeros(MID), NormalFormConfig(K=3, N=1, T=0.01, nodes=3))
    assert res.iterations == 1


@pytest.fixture(scope="module")
def small_fixed_point():
    v0 = make_gaussian(MID, 0.05, 2.0)
    cfg = NormalFormConfig(K=6, J=2, N=1, T=0.05, nodes=9)
    return v0, fixed_point_solve(v0, cfg)


def test_fixed_point_contracts_monotonically(small_fixed_point):
    _, res = small_fixed_point
    d = [x for _, x in res.history]
    assert all(b < a for a, b in zip(d, d[1:]))


def test_fixed_point_solves_the_evolution_law(small_fixed_point):
    _, res = small_fixed_point
    # centered differences carry an O(h^2) error of their own
    resid = evolution_residual(res.trajectory, res.config)
    nonlinear = modulation_norm(res.trajectory.fields[-1] - res.trajectory.fields[0], ModParams()) / res.config.T
    assert np.max(resid) < 1e-3 * nonlinear


def test_fixed_point_agrees_with_splitstep(small_fixed_point):
    v0, res = small_fixed_point
    T = res.config.T
    u0 = BoxSequence.from_field(v0, 6).to_field()
    ref = splitstep_solve(u0, EvolutionParams(T=T, dt=T / 100), store_times=[T]).fields[-1]
    err = (from_interaction(res.trajectory.fields[-1], T) - ref).l2()
    assert err < 1e-9 * u0.l2()


def test_fixed_point_limit_does_not_depend_on_threshold(small_fixed_point):
    v0, res = small_fixed_point
    other = fixed_point_solve(v0, NormalFormConfig(K=6, J=2, N=2, T=0.05, nodes=9))
    d = max((a - b).l2() for a, b in zip(res.trajectory.fields, other.trajectory.fields))
    assert d < 1e-12


def test_contraction_failure_reports_history():
    v0 = make_gaussian(MID, 2.0, 2.0)
    with pytest.raises(ContractionFailure) as e:
        fixed_point_solve(v0, NormalFormConfig(K=4, J=1, N=1, T=0.9, nodes=3, max_iter=3))
    assert len(e.value.history) == 3


def test_remainder_of_zero():
    z = Field.zeros(MID)
    cfg = NormalFormConfig(K=3, N=1, T=0.01, nodes=3)
    assert remainder_N2(Trajectory(cfg.times(), [z] * 3), 1, cfg).value == 0


def test_remainder_decreases_with_depth():
    g = GridSpec(L=16 * np.pi, M=512)
    K = 12
    v0 = BoxSequence.from_field(make_gaussian(g, 0.1, 0.25), K).to_field()
    cfg = NormalFormConfig(K=K, N=1, T=0.1, nodes=3)
    tr = Trajectory(cfg.times(), [v0] * 3)
    r1 = remainder_N2(tr, 1, cfg).value
    r2 = remainder_N2(tr, 2, cfg).value
    assert 0 < r2 < r1


# --- probe and parameters ------------------------------------------------------------


def test_cutoff_probe_band_limited_and_zero(rng):
    f = make_boxdata(MID, {0: 1.0, 2: 0.5})
    rows = cutoff_nonlinearity_probe(Trajectory([0.0], [f]), [4, 6, 8])
    assert all(d == pytest.approx(0, abs=1e-14) for _, d in rows)
    rows = cutoff_nonlinearity_probe(Trajectory([0.0], [Field.zeros(MID)]), [1, 2])
    assert all(d == 0 for _, d in rows)


def test_cutoff_probe_monotone_for_gaussian():
    f = make_gaussian(MID, 0.5, 0.7)
    rows = cutoff_nonlinearity_probe(Trajectory([0.0], [f]), [0.5, 1, 1.5, 2, 3, 5])
    d = [x for _, x in rows]
    assert all(b < a for a, b in zip(d[:-2], d[1:-1])) and d[-1] == 0


def test_select_params_inequalities():
    for R in (0.05, 0.25, 1.0, 3.0):
        pc = select_params(R)
        assert pc.R_tilde**2 * pc.N ** (-99 / 200) <= 0.5
        assert pc.T * t_bracket(pc.N, pc.R_tilde, 2.0) < 0.1 * 0.9 + 1e-15


def test_select_params_example():
    # q = 2: exponent 200/99, R~ = 1
    pc = select_params(0.25)
    assert pc.N == math.ceil(2.0 ** (200 / 99))


@pytest.mark.parametrize("q", [1.0, math.inf])
def test_select_params_rejects_edge_q(q):
    with pytest.raises(ValueError, match="unsupported"):
        select_params(0.3, ModParams(q=q))
