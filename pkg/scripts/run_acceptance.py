"""Run the acceptance criteria and write acceptance.csv."""

import sys
from dataclasses import dataclass
from pathlib import Path

from _args import parse

from nfnls.acceptance import run_all
from nfnls.lab import write_csv


@dataclass(frozen=True)
class AcceptanceRun:
    """Run some or all acceptance criteria."""

    only: tuple = ()  # criterion numbers; empty means all
    out: str = "out/acceptance"


def main(cfg: AcceptanceRun) -> int:
    results = run_all([int(c) for c in cfg.only] or None, echo=print)
    write_csv(Path(cfg.out) / "acceptance.csv", ("criterion", "name", "passed", "detail", "seconds"),
              [(r.number, r.name, r.passed, r.detail, r.seconds) for r in results])
    return 0 if all(r.passed for r in results) else 1


if __name__ == "__main__":
    sys.exit(main(parse(AcceptanceRun)))
