import hashlib

import hypothesis as hyp
import hypothesis.strategies as hyp_st
import numpy as np
import numpy.testing as npt
import pytest

from nfnls import cli, lab
from nfnls.grid import Field, GridSpec, make_gaussian
from nfnls.propagator import EvolutionParams, Trajectory, splitstep_solve


def test_rng_for_is_keyed_by_seed_and_name():
    a = lab.rng_for(3, "x").standard_normal(4)
    npt.assert_array_equal(a, lab.rng_for(3, "x").standard_normal(4))
    assert not np.allclose(a, lab.rng_for(3, "y").standard_normal(4))
    assert not np.allclose(a, lab.rng_for(4, "x").standard_normal(4))


def test_select_params_is_reexported():
    pc = lab.select_params(0.25)
    assert pc.N == 5


# --- config ---------------------------------------------------------------------


def test_parse_config_types_and_comments():
    cfg = lab.parse_config(
        """
        # a comment
        pipeline = evolve, nf-solve
        L = 16pi
        M = 512      # trailing comment
        N = none
        T = 0.02
        acceptance_only = 1, 4
        """
    )
    assert cfg.pipeline == ("evolve", "nf-solve")
    assert cfg.L == pytest.approx(16 * np.pi)
    assert cfg.M == 512 and cfg.N is None and cfg.T == 0.02
    assert cfg.acceptance_only == (1, 4)


@pytest.mark.parametrize(
    "text, msg",
    [
        ("bogus = 1", "unknown key"),
        ("M = 256\nM = 512", "duplicate"),
        ("M = lots", "cannot read"),
        ("just words", "expected"),
    ],
)
def test_parse_config_errors(text, msg):
    with pytest.raises(lab.ConfigError, match=msg):
        lab.parse_config(text)


@pytest.mark.parametrize(
    "kw, msg",
    [
        (dict(pipeline=("fly",)), "unknown pipeline"),
        (dict(data="noise"), "data kind"),
        (dict(K=40), "resolved band"),
        (dict(J=3), "J in"),
        (dict(nodes=4), "odd node"),
        (dict(steps=0), "steps must"),
    ],
)
def test_config_check_catches_bad_values(kw, msg):
    with pytest.raises(ValueError, match=msg):
        lab.ExperimentConfig(**kw).check()


@hyp.given(
    M=hyp_st.sampled_from([128, 256, 512]),
    K=hyp_st.integers(1, 6),
    T=hyp_st.one_of(hyp_st.none(), hyp_st.floats(1e-3, 0.9)),
    seed=hyp_st.integers(0, 2**64 - 1),
)
@hyp.settings(max_examples=30, deadline=None)
def test_config_dump_roundtrip(M, K, T, seed):
    cfg = lab.ExperimentConfig(M=M, K=K, T=T, seed=seed, pipeline=("norm",))
    assert lab.parse_config(lab.dump_config(cfg)) == cfg


def test_load_config_with_overrides(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("amplitude = 0.3\nK = 4\n")
    cfg = lab.load_config(p, ["K = 5"])
    assert cfg.amplitude == 0.3 and cfg.K == 5


# --- comparisons ----------------------------------------------------------------


def _traj(grid, fields, T=0.1):
    return Trajectory(np.linspace(0, T, len(fields)), fields)


def test_compare_identical_is_zero():
    g = GridSpec(L=16 * np.pi, M=128)
    u = make_gaussian(g, 0.3, 1.5)
    c = lab.compare_trajectories(_traj(g, [u, u, u]), _traj(g, [u, u, u]))
    assert c.max_m == 0 and c.max_l2 == 0


def test_compare_plane_wave_offset():
    g = GridSpec(L=16 * np.pi, M=128)
    u = make_gaussian(g, 0.3, 1.5)
    eps = 1e-3
    w = Field(g, eps * np.exp(1j * 2.0 * g.x))
    c = lab.compare_trajectories(_traj(g, [u + w] * 3), _traj(g, [u] * 3))
    for _, _, l2 in c.rows:
        assert abs(l2 - eps * np.sqrt(g.L)) < 1e-12


def test_compare_rejects_mismatch():
    g = GridSpec(L=16 * np.pi, M=128)
    u = make_gaussian(g, 0.3, 1.5)
    with pytest.raises(ValueError, match="grids"):
        lab.compare_trajectories(_traj(g, [u]), _traj(GridSpec(L=16 * np.pi, M=256), [make_gaussian(GridSpec(L=16 * np.pi, M=256))]))
    with pytest.raises(ValueError, match="node times"):
        lab.compare_trajectories(_traj(g, [u, u]), _traj(g, [u, u], T=0.2))


def test_csv_header_and_precision(tmp_path):
    p = lab.write_csv(tmp_path / "a.csv", ("i", "x"), [(1, 1 / 3), (2, True)])
    lines = p.read_text().splitlines()
    assert lines == ["i,x", "1,0.33333333333333331", "2,1"]


# --- pipeline -------------------------------------------------------------------


def test_empty_pipeline(tmp_path):
    rep = lab.run_experiment(lab.ExperimentConfig(out=str(tmp_path / "o")))
    assert rep.exit_code == 0 and rep.stages == {} and rep.files == []


def _digest(d):
    h = hashlib.sha256()
    for p in sorted(d.rglob("*")):
        if p.is_file():
            h.update(p.relative_to(d).as_posix().encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def test_seeded_runs_are_byte_identical(tmp_path):
    cfg = lab.ExperimentConfig(pipeline=("norm", "nf-solve"), data="random", amplitude=0.05, T=0.01,
                               nodes=3, K=3, seed=11, out=str(tmp_path / "r"))
    digests = []
    for _ in range(2):
        rep = lab.run_experiment(cfg)
        assert rep.exit_code == 0, rep.error
        digests.append(_digest(tmp_path / "r"))
    assert digests[0] == digests[1]


def test_pipeline_agrees_with_reference(tmp_path):
    cfg = lab.ExperimentConfig(pipeline=("evolve", "nf-solve"), amplitude=0.1, T=0.01, nodes=5,
                               max_compare=1e-12, out=str(tmp_path / "o"))
    rep = lab.run_experiment(cfg)
    assert rep.exit_code == 0
    assert rep.stages["nf-solve"]["compare_max_l2"] < 1e-12
    assert rep.derived["T"] == 0.01 and rep.derived["N"] >= 1


def test_failed_assertion_and_module_error(tmp_path):
    rep = lab.run_experiment(lab.ExperimentConfig(pipeline=("nf-solve",), T=0.01, nodes=3,
                                                  max_compare=0.0, out=str(tmp_path / "a")))
    assert rep.exit_code == 1 and rep.failures
    # strong data and a long time: the iteration does not contract
    rep = lab.run_experiment(lab.ExperimentConfig(pipeline=("nf-solve",), amplitude=2.0, N=1, T=0.9, nodes=3,
                                                  max_iter=5, out=str(tmp_path / "b")))
    assert rep.exit_code == 2 and rep.error["type"] == "ContractionFailure"
    assert (tmp_path / "b" / "manifest.json").exists()


# --- command line ---------------------------------------------------------------


def test_cli_trees_and_resonance(tmp_path, capsys):
    assert cli.main(["--out", str(tmp_path), "trees", "--max-J", "3"]) == 0
    assert (tmp_path / "trees.csv").read_text().splitlines()[1:] == ["1,1,1,4,3", "2,3,3,7,5", "3,15,15,10,7"]
    assert cli.main(["--out", str(tmp_path), "--set", "K=2", "resonance", "--n", "0"]) == 0
    rows = (tmp_path / "resonance.csv").read_text().splitlines()
    assert rows[0] == "n1,n2,n3,phase,resonant,class" and len(rows) > 1


def test_cli_compare_and_errors(tmp_path, capsys):
    g = GridSpec(L=16 * np.pi, M=128)
    u0 = make_gaussian(g, 0.2, 1.5)
    tr = splitstep_solve(u0, EvolutionParams(T=0.02, dt=0.001), store_times=[0, 0.01, 0.02])
    tr.save(tmp_path / "a")
    tr.save(tmp_path / "b")
    assert cli.main(["--out", str(tmp_path), "--set", "M=128", "compare", str(tmp_path / "a"), str(tmp_path / "b")]) == 0
    assert "max L2 0.000000e+00" in capsys.readouterr().out
    assert cli.main(["--set", "bogus=1", "norm"]) == 2
    assert cli.main(["--out", str(tmp_path), "compare", str(tmp_path / "a"), str(tmp_path / "nope")]) == 2


def test_cli_acceptance_subset(tmp_path, capsys):
    assert cli.main(["--out", str(tmp_path), "acceptance", "--only", "1", "14"]) == 0
    out = capsys.readouterr().out
    assert "[PASS] C01" in out and "[PASS] C14" in out
