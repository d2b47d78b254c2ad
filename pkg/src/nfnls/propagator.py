"""Free Schrodinger flow, interaction picture and the split-step reference solver.

Equation solved: ``i u_t - u_xx + lam |u|^2 u = 0`` with ``lam = +1``
(defocusing, the default) or ``lam = -1``.  The linear part of that
flow is the multiplier ``exp(+i t xi^2)``; ``free_evolve`` applies the
opposite multiplier ``exp(-i t xi^2)``, so that ``v = free_evolve(u, t)``
is the interaction-picture variable.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .grid import Field, GridSpec, read_field, samples_from_spectrum, spectrum_from_samples, write_field
from .modulation import ModParams, modulation_norm


def free_evolve(f: Field, t: float) -> Field:
    if t == 0:
        return f
    return Field.from_spectrum(f.grid, np.exp(-1j * t * f.grid.xi**2) * f.spectrum)


def to_interaction(u: Field, t: float) -> Field:
    return free_evolve(u, t)


def from_interaction(v: Field, t: float) -> Field:
    return free_evolve(v, -t)


@dataclass(frozen=True)
class EvolutionParams:
    sign: int = 1
    T: float = 0.1
    dt: float = 1e-3
    nonlinear: bool = True  # False drops the cubic term (diagnostic)
    alias_tol: float = 1e-8

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")
        if not (0 < self.T < 1):
            raise ValueError(f"final time must lie in (0, 1), got {self.T}")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        n = self.T / self.dt
        if abs(n - round(n)) > 1e-12 * max(1.0, n):
            raise ValueError(f"dt={self.dt} does not divide T={self.T}")

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))


@dataclass
class Trajectory:
    """Fields sampled at increasing times on one grid."""

    times: np.ndarray
    fields: list[Field]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.times) != len(self.fields):
            raise ValueError("times and fields differ in length")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must increase strictly")

    @property
    def grid(self) -> GridSpec:
        return self.fields[0].grid

    def __len__(self):
        return len(self.times)

    def at(self, t: float) -> Field:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9:
            raise KeyError(f"no stored node at t={t}")
        return self.fields[i]

    def map(self, fn) -> "Trajectory":
        """Apply ``fn(field, t)`` node by node."""
        return Trajectory(self.times.copy(), [fn(f, t) for f, t in zip(self.fields, self.times)], dict(self.meta))

    def save(self, directory: str | Path) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        names = []
        for i, f in enumerate(self.fields):
            name = f"field_{i:04d}.bin"
            write_field(d / name, f)
            names.append(name)
        manifest = {
            "grid": {"L": self.grid.L, "M": self.grid.M},
            "times": [float(t) for t in self.times],
            "files": names,
            "meta": self.meta,
        }
        (d / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_jsonable))

    @classmethod
    def load(cls, directory: str | Path) -> "Trajectory":
        d = Path(directory)
        manifest = json.loads((d / "manifest.json").read_text())
        fields = [read_field(d / name) for name in manifest["files"]]
        g = GridSpec(L=manifest["grid"]["L"], M=manifest["grid"]["M"])
        if any(f.grid != g for f in fields):
            raise ValueError(f"{d}: field grids disagree with the manifest")
        return cls(np.array(manifest["times"]), fields, manifest.get("meta", {}))


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def cubic_alias_fraction(samples: np.ndarray, L: float) -> float:
    """Relative energy of |u|^2 u outside the grid band.

    The cubic product is formed on a grid twice as fine; whatever lands
    beyond the Nyquist band of the original grid would fold back.
    """
    M = samples.shape[-1]
    spec = spectrum_from_samples(samples, L)
    fine = samples_from_spectrum(spec, L, P=2 * M)
    cub = spectrum_from_samples(np.abs(fine) ** 2 * fine, L)
    tot = np.sum(np.abs(cub) ** 2)
    if tot == 0:
        return 0.0
    inner = cub[M // 2 : M // 2 + M]
    return float(1 - np.sum(np.abs(inner) ** 2) / tot)


def splitstep_solve(u0: Field, params: EvolutionParams, store_times=None) -> Trajectory:
    """Strang splitting: half linear, exact pointwise nonlinear, half linear.

    ``store_times`` must be multiples of ``dt``; by default every step is kept.
    """
    grid, dt, lam = u0.grid, params.dt, params.sign
    nsteps = params.steps
    if store_times is None:
        keep = set(range(nsteps + 1))
    else:
        keep = set()
        for t in store_times:
            s = t / dt
            if abs(s - round(s)) > 1e-9 or not (0 <= round(s) <= nsteps):
                raise ValueError(f"store time {t} is not a step multiple inside [0, T]")
            keep.add(int(round(s)))

    if params.nonlinear:
        # per-step aliasing energy ~ (dt * ||P_out |u|^2 u||)^2 / ||u||^2
        frac = cubic_alias_fraction(u0.samples, grid.L)
        mass = u0.l2()
        cub = np.abs(u0.samples) ** 2 * u0.samples
        cub_norm = np.sqrt(np.sum(np.abs(cub) ** 2) * grid.dx)
        per_step = (dt * cub_norm) ** 2 * frac / max(mass**2, 1e-300)
        if per_step > params.alias_tol:
            suggest = dt * np.sqrt(params.alias_tol / per_step)
            raise ValueError(
                f"per-step aliasing energy {per_step:.2e} exceeds {params.alias_tol:.0e}; try dt <= {suggest:.3e}"
            )

    half = np.exp(0.5j * dt * grid.xi**2)
    spec = u0.spectrum.copy()
    times, fields = [], []
    if 0 in keep:
        times.append(0.0)
        fields.append(u0)
    for step in range(1, nsteps + 1):
        spec = spec * half
        if params.nonlinear:
            u = samples_from_spectrum(spec, grid.L)
            u = u * np.exp(1j * lam * dt * np.abs(u) ** 2)
            spec = spectrum_from_samples(u, grid.L)
        spec = spec * half
        if not np.all(np.isfinite(spec)):
            raise FloatingPointError(f"non-finite values at step {step}")
        if step in keep:
            times.append(step * dt)
            fields.append(Field.from_spectrum(grid, spec.copy()))
    masses = np.array([f.l2() for f in fields])
    meta = {
        "solver": "splitstep",
        "params": asdict(params),
        "mass_drift": float(np.max(np.abs(masses - masses[0])) / max(masses[0], 1e-300)) if len(masses) else 0.0,
    }
    return Trajectory(np.array(times), fields, meta)


def semigroup_growth_ratio(f: Field, t: float, params: ModParams) -> float:
    den = modulation_norm(f, params)
    if den == 0:
        raise ZeroDivisionError("zero field has no growth ratio")
    num = modulation_norm(free_evolve(f, t), params)
    return num / ((1 + abs(t)) ** abs(0.5 - 1 / params.p) * den)
