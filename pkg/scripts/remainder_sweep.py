"""Remainder norms at depth one and two along the free trajectory.

The map v(t) = v0 is used so that the measured remainders are exactly
homogeneous in the amplitude (degree 3 at depth one, 5 at depth two).
"""

import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from _args import parse

from nfnls.grid import GridSpec, make_gaussian
from nfnls.lab import write_csv
from nfnls.modulation import ModParams, modulation_norm
from nfnls.normal_form import BoxSequence, NormalFormConfig, remainder_N2, select_params
from nfnls.propagator import Trajectory


@dataclass(frozen=True)
class RemainderSweep:
    """Remainder norms across an amplitude sweep with N held fixed."""

    amplitudes: tuple = (0.2, 0.1, 0.05)
    width: float = 0.25
    M: int = 512
    K: int = 12
    T: float = 0.1
    nodes: int = 3
    N_from: float = 0.1  # amplitude whose data fixes N
    out: str = "out/remainder"


def main(cfg: RemainderSweep) -> int:
    g = GridSpec(L=16 * np.pi, M=cfg.M)
    N = select_params(modulation_norm(make_gaussian(g, cfg.N_from, cfg.width), ModParams())).N
    nf = NormalFormConfig(K=cfg.K, J=2, N=N, T=cfg.T, nodes=cfg.nodes)
    rows = []
    for a in cfg.amplitudes:
        v0 = BoxSequence.from_field(make_gaussian(g, a, cfg.width), cfg.K).to_field()
        traj = Trajectory(nf.times(), [v0] * nf.nodes)
        for J in (1, 2):
            r = remainder_N2(traj, J, nf)
            rows.append((J, a, N, r.value))
            print(f"J={J} a={a:g} remainder={r.value:.3e}")
    write_csv(Path(cfg.out) / "remainder.csv", ("J", "amplitude", "N", "remainder"), rows)
    return 0


if __name__ == "__main__":
    sys.exit(main(parse(RemainderSweep)))
