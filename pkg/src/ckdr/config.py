"""Flat ``key = value`` run configuration with a strict key whitelist.

Dotted keys declare the datasets, the kernel family, the constraint
parameters, training options, and report options.  Unknown keys are hard
errors so experiment records stay diff-able and typo-proof.
"""

import re
from pathlib import Path

import numpy as np

from .constraints import ConstraintParams
from .errors import ConfigError, DataError
from .kernels import KernelSpec
from .trainer import TrainConfig

_SCALAR_KEYS = {
    "seed": int,
    "data.labeled": str,
    "data.unlabeled": str,
    "data.format": str,
    "constraints.r": int,
    "constraints.lambda_r": float,
    "constraints.nu": float,
    "constraints.delta": float,
    "train.loss": str,
    "train.mode": str,
    "train.max_rounds": int,
    "train.inner_iters": int,
    "train.step": float,
    "train.xi_step": float,
    "train.tol": float,
    "train.seed": int,
    "rademacher.draws": int,
    "rademacher.probe_draws": int,
    "rademacher.starts": int,
    "bounds.rho": float,
    "output.dir": str,
    "output.figures": bool,
    "verify.draws": int,
    "verify.trials": int,
}

_KERNEL_KEY = re.compile(r"^kernel\.(\d+)\.(kind|degree|bandwidth|coords|normalize|path)$")

_BOOLEANS = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def _coerce(key, raw, typ):
    try:
        if typ is bool:
            if raw.lower() not in _BOOLEANS:
                raise ValueError
            return _BOOLEANS[raw.lower()]
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r} as {typ.__name__}") from None


class RunConfig:
    """Parsed configuration plus typed accessors for the CLI commands."""

    def __init__(self, values, kernel_entries, base_dir):
        self.values = values
        self.kernel_entries = kernel_entries
        self.base_dir = base_dir

    @classmethod
    def parse(cls, path):
        path = Path(path)
        values, kernel_entries = {}, {}
        try:
            lines = path.read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from None
        for lineno, line in enumerate(lines, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = (part.strip() for part in line.split("=", 1))
            m = _KERNEL_KEY.match(key)
            if m:
                idx, fieldname = int(m.group(1)), m.group(2)
                kernel_entries.setdefault(idx, {})
                if fieldname in kernel_entries[idx]:
                    raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
                kernel_entries[idx][fieldname] = raw
                continue
            if key not in _SCALAR_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            if key in values:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            values[key] = _coerce(key, raw, _SCALAR_KEYS[key])
        return cls(values, kernel_entries, path.parent)

    def get(self, key, default=None):
        return self.values.get(key, default)

    def require(self, key):
        if key not in self.values:
            raise ConfigError(f"missing required config key {key!r}")
        return self.values[key]

    @property
    def seed(self):
        return self.get("seed", 0)

    def resolve(self, rel):
        p = Path(rel)
        return p if p.is_absolute() else self.base_dir / p

    def dataset_paths(self):
        labeled = self.resolve(self.require("data.labeled"))
        unlabeled = self.get("data.unlabeled")
        if unlabeled is not None:
            unlabeled = self.resolve(unlabeled)
        fmt = self.get("data.format", "csv")
        for p in (labeled, unlabeled):
            if p is not None and not Path(p).exists():
                raise ConfigError(f"dataset file does not exist: {p}")
        return labeled, unlabeled, fmt

    def kernels(self):
        if not self.kernel_entries:
            raise ConfigError("no kernels declared (kernel.<i>.kind = ...)")
        indices = sorted(self.kernel_entries)
        if indices != list(range(1, len(indices) + 1)):
            raise ConfigError("kernel indices must be contiguous starting at 1")
        specs = []
        for i in indices:
            entry = dict(self.kernel_entries[i])
            kind = entry.pop("kind", None)
            if kind is None:
                raise ConfigError(f"kernel.{i}.kind is missing")
            kwargs = {"kind": kind}
            if "degree" in entry:
                kwargs["degree"] = _coerce(f"kernel.{i}.degree", entry.pop("degree"), int)
            if "bandwidth" in entry:
                kwargs["bandwidth"] = _coerce(f"kernel.{i}.bandwidth", entry.pop("bandwidth"), float)
            if "coords" in entry:
                raw = entry.pop("coords")
                try:
                    one_based = tuple(int(t) for t in raw.split(","))
                except ValueError:
                    raise ConfigError(f"kernel.{i}.coords: cannot parse {raw!r}") from None
                if any(c < 1 for c in one_based):
                    raise ConfigError(f"kernel.{i}.coords are 1-based")
                kwargs["coords"] = tuple(c - 1 for c in one_based)
            if "normalize" in entry:
                kwargs["normalize"] = _coerce(f"kernel.{i}.normalize", entry.pop("normalize"), bool)
            if "path" in entry:
                mat_path = self.resolve(entry.pop("path"))
                try:
                    kwargs["matrix"] = np.loadtxt(mat_path, delimiter=",", ndmin=2)
                except OSError as exc:
                    raise ConfigError(f"kernel.{i}: cannot read matrix {mat_path}: {exc}") from None
                except ValueError as exc:
                    raise DataError(f"kernel.{i}: malformed matrix CSV {mat_path}: {exc}") from None
            if entry:
                raise ConfigError(f"kernel.{i} has unused fields {sorted(entry)}")
            try:
                specs.append(KernelSpec(**kwargs))
            except DataError as exc:
                raise ConfigError(f"kernel.{i}: {exc}") from None
        return tuple(specs)

    def constraint_params(self):
        return ConstraintParams(
            r=self.require("constraints.r"),
            lambda_r=self.require("constraints.lambda_r"),
            nu=self.require("constraints.nu"),
            delta=self.get("constraints.delta", 0.05),
        )

    def train_config(self):
        return TrainConfig(
            loss=self.get("train.loss", "hinge"),
            mode=self.get("train.mode", "coupled"),
            max_rounds=self.get("train.max_rounds", 50),
            inner_iters=self.get("train.inner_iters", 100),
            step=self.get("train.step", 1.0),
            xi_step=self.get("train.xi_step", 0.25),
            tol=self.get("train.tol", 1e-8),
            seed=self.get("train.seed", self.seed),
        )

    def output_dir(self):
        # outputs land under the invocation directory; inputs resolve
        # against the config file so configs stay portable
        return Path(self.get("output.dir", "out"))

    @property
    def figures(self):
        return self.get("output.figures", True)
