"""Experiment orchestration: parameter selection, configs, comparisons."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import typing
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import Field, GridSpec, fmt, make_boxdata, make_gaussian, set_fft_workers
from .modulation import ModParams, box_table, modulation_norm
from .normal_form import NormalFormConfig, fixed_point_solve, remainder_N2, select_params
from .propagator import EvolutionParams, Trajectory, from_interaction, splitstep_solve

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "Report",
    "compare_trajectories",
    "load_config",
    "parse_config",
    "rng_for",
    "run_experiment",
    "select_params",
    "write_csv",
]

STAGES = ("norm", "evolve", "nf-solve", "remainder", "acceptance")
DATA_KINDS = ("gaussian", "boxdata", "random")


def rng_for(seed: int, name: str) -> np.random.Generator:
    """Counter-based generator keyed by (seed, name)."""
    digest = hashlib.sha256(f"{int(seed)}:{name}".encode()).digest()
    key = int.from_bytes(digest[:16], "little")
    return np.random.Generator(np.random.Philox(key=key))


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat record of everything one run needs.

    Mirrors NormalFormConfig and EvolutionParams plus the data generator,
    output directory and seed.  ``N``/``T`` left as None are chosen from
    the data by select_params.
    """

    pipeline: tuple = ()
    # data
    data: str = "gaussian"
    amplitude: float = 0.1
    width: float = 2.0
    L: float = 16 * math.pi
    M: int = 256
    # normal form
    K: int = 6
    J: int = 2
    N: typing.Optional[float] = None
    T: typing.Optional[float] = None
    nodes: int = 9
    sign: int = 1
    p: float = 2.0
    q: float = 2.0
    s: float = 0.0
    tol: float = 1e-12
    max_iter: int = 60
    C: float = 1.0
    # reference solver: steps over [0, T]
    steps: int = 200
    # assertion on the split-step comparison (None: no assertion)
    max_compare: typing.Optional[float] = None
    acceptance_only: tuple = ()
    out: str = "out"
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "pipeline", tuple(self.pipeline))
        object.__setattr__(self, "acceptance_only", tuple(int(c) for c in self.acceptance_only))

    @property
    def grid(self) -> GridSpec:
        return GridSpec(L=self.L, M=self.M)

    @property
    def params(self) -> ModParams:
        return ModParams(self.p, self.q, self.s)

    def nf_config(self) -> NormalFormConfig:
        return NormalFormConfig(
            K=self.K, J=self.J, N=self.N, T=self.T, nodes=self.nodes, sign=self.sign,
            params=self.params, tol=self.tol, max_iter=self.max_iter, C=self.C,
        )

    def check(self) -> None:
        """Run every downstream precondition that does not need the data."""
        bad = [s for s in self.pipeline if s not in STAGES]
        if bad:
            raise ConfigError(f"unknown pipeline stages {bad}; known: {', '.join(STAGES)}")
        if self.data not in DATA_KINDS:
            raise ConfigError(f"unknown data kind {self.data!r}; known: {', '.join(DATA_KINDS)}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if any(not 1 <= c <= 14 for c in self.acceptance_only):
            raise ConfigError("acceptance criteria are numbered 1..14")
        g = self.grid
        if self.K > g.max_resolved_box:
            raise ConfigError(f"K={self.K} exceeds the resolved band |k| <= {g.max_resolved_box} of this grid")
        self.nf_config()
        if self.T is not None:
            EvolutionParams(sign=self.sign, T=self.T, dt=self.T / self.steps)

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)


# --- flat key = value format ------------------------------------------------------


def _field_types() -> dict:
    hints = typing.get_type_hints(ExperimentConfig)
    return {f.name: hints[f.name] for f in dataclasses.fields(ExperimentConfig)}


def _parse_float(text: str) -> float:
    t = text.strip().lower().replace(" ", "")
    # "16pi" and "16*pi" are accepted for domain lengths
    for suffix in ("*pi", "pi"):
        if t.endswith(suffix):
            head = t[: -len(suffix)]
            return (float(head) if head else 1.0) * math.pi
    return float(t)


def _coerce(key: str, raw: str, tp):
    raw = raw.strip()
    origin = typing.get_origin(tp)
    if origin is typing.Union:
        if raw.lower() in ("none", ""):
            return None
        tp = next(a for a in typing.get_args(tp) if a is not type(None))
    try:
        if tp is tuple:
            return tuple(x.strip() for x in raw.split(",") if x.strip())
        if tp is bool:
            return {"true": True, "false": False}[raw.lower()]
        if tp is int:
            return int(raw)
        if tp is float:
            return _parse_float(raw)
        return raw
    except (ValueError, KeyError) as e:
        raise ConfigError(f"{key}: cannot read {raw!r} as {tp.__name__}") from e


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Read ``key = value`` lines; ``#`` starts a comment.  Unknown keys are errors."""
    types = _field_types()
    seen = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (x.strip() for x in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen[key] = _coerce(key, raw, types[key])
    return dataclasses.replace(base or ExperimentConfig(), **seen)


def load_config(path, overrides=()) -> ExperimentConfig:
    cfg = parse_config(Path(path).read_text()) if path else ExperimentConfig()
    if overrides:
        cfg = parse_config("\n".join(overrides), cfg)
    cfg.check()
    return cfg


def dump_config(cfg: ExperimentConfig) -> str:
    lines = []
    for k, v in dataclasses.asdict(cfg).items():
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        elif isinstance(v, float):
            v = fmt(v)
        lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"


# --- CSV and comparisons ----------------------------------------------------------


def _cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return fmt(float(x))
    return str(x)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(_cell(x) for x in r) + "\n")
    return path


@dataclass
class Comparison:
    rows: list  # (t, M-norm of a - b, L2 norm of a - b)
    max_m: float
    max_l2: float

    header = ("t", "mnorm_diff", "l2_diff")

    def write(self, path) -> Path:
        return write_csv(path, self.header, self.rows)


def compare_trajectories(a: Trajectory, b: Trajectory, params: ModParams = ModParams()) -> Comparison:
    """Node-by-node distances between two trajectories on the same grid and times."""
    if a.grid != b.grid:
        raise ValueError(f"grids differ: {a.grid} vs {b.grid}")
    if len(a) != len(b) or np.max(np.abs(a.times - b.times)) > 1e-12:
        raise ValueError("trajectories are stored at different node times")
    rows = []
    for t, x, y in zip(a.times, a.fields, b.fields):
        d = x - y
        # a difference near roundoff is mostly out-of-band noise in relative terms,
        # so the leakage guard is off here; the L2 column sees the whole band
        rows.append((float(t), modulation_norm(d, params, leakage_tol=np.inf), d.l2()))
    return Comparison(rows, max(r[1] for r in rows), max(r[2] for r in rows))


# --- pipeline ---------------------------------------------------------------------


def make_data(cfg: ExperimentConfig) -> Field:
    g = cfg.grid
    if cfg.data == "gaussian":
        return make_gaussian(g, cfg.amplitude, cfg.width)
    rng = rng_for(cfg.seed, f"data-{cfg.data}")
    kmax = min(cfg.K, g.max_resolved_box, 3)
    coeffs = {k: cfg.amplitude * complex(*rng.standard_normal(2)) / math.sqrt(2) for k in range(-kmax, kmax + 1)}
    return make_boxdata(g, coeffs, profile_halfwidth=0.25 if cfg.data == "boxdata" else 0.6)


@dataclass
class Report:
    config: ExperimentConfig
    stages: dict = field(default_factory=dict)  # name -> summary
    files: list = field(default_factory=list)
    failures: list = field(default_factory=list)  # configured assertions that failed
    error: dict | None = None  # structured diagnostic of a module error
    derived: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        if self.error is not None:
            return 2
        return 1 if self.failures else 0


class _Run:
    """State shared by the stages of one run (data, resolved config, trajectories)."""

    def __init__(self, cfg: ExperimentConfig, report: Report):
        self.cfg = cfg
        self.report = report
        self.out = Path(cfg.out)
        self.u0 = make_data(cfg)
        self.nf = cfg.nf_config().resolve(self.u0)
        report.derived.update({"N": self.nf.N, "T": self.nf.T, "R": modulation_norm(self.u0, cfg.params)})
        self._ref = None

    def csv(self, name, header, rows):
        p = write_csv(self.out / name, header, rows)
        self.report.files.append(name)
        return p

    def reference(self) -> Trajectory:
        if self._ref is None:
            T = self.nf.T
            ep = EvolutionParams(sign=self.cfg.sign, T=T, dt=T / self.cfg.steps)
            self._ref = splitstep_solve(self.u0, ep, store_times=self.nf.times())
        return self._ref


def _stage_norm(run: _Run) -> dict:
    rows = box_table(run.u0, run.cfg.params)
    run.csv("norm.csv", ("k", "box_norm", "weight", "contribution"), rows)
    return {"mnorm": modulation_norm(run.u0, run.cfg.params), "l2": run.u0.l2()}


def _stage_evolve(run: _Run) -> dict:
    tr = run.reference()
    rows = [(t, f.l2(), modulation_norm(f, run.cfg.params)) for t, f in zip(tr.times, tr.fields)]
    run.csv("evolve.csv", ("t", "l2", "mnorm"), rows)
    tr.save(run.out / "evolve_traj")
    return {"mass_drift": tr.meta.get("mass_drift", float("nan"))}


def _stage_nf_solve(run: _Run) -> dict:
    res = fixed_point_solve(run.u0, run.nf)
    run.csv("history.csv", ("iteration", "distance"), res.history)
    u = res.trajectory.map(lambda v, t: from_interaction(v, t))
    u.save(run.out / "nf_traj")
    cmp = compare_trajectories(u, run.reference(), run.cfg.params)
    cmp.write(run.out / "compare.csv")
    run.report.files.append("compare.csv")
    run.solution = res.trajectory
    summary = {"iterations": res.iterations, "compare_max_mnorm": cmp.max_m, "compare_max_l2": cmp.max_l2}
    if run.cfg.max_compare is not None and not cmp.max_l2 <= run.cfg.max_compare:
        run.report.failures.append(f"nf-solve: split-step distance {cmp.max_l2:.3e} > {run.cfg.max_compare:.3e}")
    return summary


def _stage_remainder(run: _Run) -> dict:
    traj = getattr(run, "solution", None)
    if traj is None:
        traj = fixed_point_solve(run.u0, run.nf).trajectory
    rows, summary = [], {}
    for J in range(1, run.nf.J + 1):
        rep = remainder_N2(traj, J, run.nf)
        rows += [(J, t, v) for t, v in zip(rep.times, rep.per_node)]
        summary[f"J{J}"] = rep.value
    run.csv("remainder.csv", ("J", "t", "remainder"), rows)
    return summary


def _stage_acceptance(run: _Run) -> dict:
    from .acceptance import run_all

    results = run_all(run.cfg.acceptance_only or None)
    run.csv("acceptance.csv", ("criterion", "name", "passed", "detail"),
            [(r.number, r.name, r.passed, r.detail) for r in results])
    failed = [r.number for r in results if not r.passed]
    if failed:
        run.report.failures.append(f"acceptance: criteria {failed} failed")
    return {"passed": sum(r.passed for r in results), "total": len(results)}


_STAGE_FUNCS = {
    "norm": _stage_norm,
    "evolve": _stage_evolve,
    "nf-solve": _stage_nf_solve,
    "remainder": _stage_remainder,
    "acceptance": _stage_acceptance,
}


def run_experiment(cfg: ExperimentConfig) -> Report:
    """Run the configured stages in order and write manifest.json plus CSVs to ``cfg.out``.

    A module error stops the run and is recorded as a diagnostic (exit code 2);
    failed assertions give exit code 1.
    """
    cfg.check()
    report = Report(cfg)
    if not cfg.pipeline:
        return report
    set_fft_workers(cfg.threads)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    stage = "setup"
    try:
        run = _Run(cfg, report)
        for stage in cfg.pipeline:
            report.stages[stage] = _STAGE_FUNCS[stage](run)
    except Exception as e:  # every module error becomes a diagnostic
        report.error = {"stage": stage, "type": type(e).__name__, "message": str(e)}
    manifest = {
        "config": dataclasses.asdict(cfg),
        "derived": report.derived,
        "stages": report.stages,
        "files": report.files,
        "failures": report.failures,
        "error": report.error,
        "exit_code": report.exit_code,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return report


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")
