"""Turn a dataclass into argparse flags (one --field per attribute)."""

import argparse
import dataclasses


def parse(cls, argv=None, description=None):
    ap = argparse.ArgumentParser(description=description or cls.__doc__)
    for f in dataclasses.fields(cls):
        default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
        if isinstance(default, tuple):
            kind = type(default[0]) if default else str
            ap.add_argument(f"--{f.name.replace('_', '-')}", type=kind, nargs="*", default=default)
        elif isinstance(default, bool):
            ap.add_argument(f"--{f.name.replace('_', '-')}", action=argparse.BooleanOptionalAction, default=default)
        else:
            ap.add_argument(f"--{f.name.replace('_', '-')}", type=type(default), default=default)
    ns = ap.parse_args(argv)
    return cls(**{f.name: (tuple(v) if isinstance(v, list) else v) for f, v in zip(dataclasses.fields(cls), vars(ns).values())})
