"""Experiment configuration: flat dotted keys with typed accessors and validation.

The file grammar is described in ``docs/config.md``. Both forms below are
accepted and mean the same thing::

    cone.variant = orthant          [cone]
    cone.dimension = 2              variant = orthant
                                    dimension = 2

Values are JSON literals when they parse as JSON, bare strings otherwise.
"""

from __future__ import annotations

import configparser
import json
import math
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from .cones import Cone
from .harmonic import HarmonicForm
from .laws import IncrementLaw

DEFAULT_SEED = 20240917
_ROOT = "__root__"

DEFAULTS: dict = {
    "cone.variant": "half-line",
    "cone.dimension": None,
    "cone.angle": None,
    "cone.mesh": 4096,
    "law.variant": "rademacher",
    "law.tail_index": None,
    "run.samples": 100_000,
    "run.seed": DEFAULT_SEED,
    "run.threads": 1,
    "run.out": "results",
    "run.stages": [],
    "run.audit": 0,
    "run.n": 1024,
    "points.x": None,
    "points.x_list": None,
    "grid.n": [64, 128, 256, 512, 1024, 2048, 4096, 8192],
    "grid.k": [16, 64, 256, 1024, 4096],
    "schedule.n0": 64,
    "schedule.epsilon": 0.1,
    "schedule.m_max": 2,
    "shift.gamma": None,
    "v.construction": 1,
    "probe.beta": None,
    "probe.horizon": 10_000,
    "probe.t_exp": None,
    "probe.eps": 0.2,
    "density.n": 4096,
    "density.bins": 40,
    "lclt.n": 256,
    "lclt.min_hits": 50,
    "eigen.theta0": None,
    "eigen.mesh": 4096,
}

STAGES = ("eigen", "simulate", "estimate-v", "decompose", "tail-fit", "kappa-trace",
          "conditional-dist", "local-clt")


class ConfigError(ValueError):
    pass


_PI_RE = re.compile(r"^\s*(?:([0-9]*\.?[0-9]+)\s*\*?\s*)?pi\s*(?:/\s*([0-9]*\.?[0-9]+))?\s*$")


def parse_angle(value) -> float | None:
    """Radians from a number or a ``[a*]pi[/b]`` string such as ``2*pi/3``."""
    if value is None or isinstance(value, (int, float)):
        return None if value is None else float(value)
    m = _PI_RE.match(str(value))
    if not m:
        raise ConfigError(f"cannot read angle {value!r}")
    return float(m.group(1) or 1.0) * math.pi / float(m.group(2) or 1.0)


def parse_value(text: str):
    text = text.strip()
    try:
        return json.loads(text)
    except ValueError:
        return text


def format_value(value) -> str:
    if isinstance(value, str):
        # keep strings bare unless they would be read back as something else
        return value if parse_value(value) == value and value.strip() == value and value else json.dumps(value)
    return json.dumps(value)


def parse_text(text: str) -> dict:
    """Flat ``{dotted.key: value}`` from config text."""
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=None, strict=True)
    cp.optionxform = str
    try:
        cp.read_string(f"[{_ROOT}]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    out = {}
    for section in cp.sections():
        for key, raw in cp.items(section):
            dotted = key if section == _ROOT else f"{section}.{key}"
            if dotted in out:
                raise ConfigError(f"duplicate key {dotted}")
            out[dotted] = parse_value(raw)
    return out


def dump_text(values: dict) -> str:
    """Serialise to the flat form; ``parse_text(dump_text(v)) == v``."""
    return "".join(f"{k} = {format_value(values[k])}\n" for k in sorted(values))


@dataclass
class ExperimentConfig:
    """Validated experiment settings; ``values`` holds only explicitly set keys."""

    values: dict = field(default_factory=dict)

    @classmethod
    def from_file(cls, path: str | Path) -> ExperimentConfig:
        return cls.from_text(Path(path).read_text())

    @classmethod
    def from_text(cls, text: str) -> ExperimentConfig:
        return cls(parse_text(text))

    def to_text(self) -> str:
        return dump_text(self.values)

    def with_overrides(self, **overrides) -> ExperimentConfig:
        vals = dict(self.values)
        vals.update({k: v for k, v in overrides.items() if v is not None})
        return ExperimentConfig(vals)

    def get(self, key: str):
        if key in self.values:
            return self.values[key]
        if key not in DEFAULTS:
            raise ConfigError(f"unknown key {key}")
        return DEFAULTS[key]

    def __getitem__(self, key: str):
        return self.get(key)

    # ---- typed views ---------------------------------------------------------

    def cone(self) -> Cone:
        return Cone.from_config(str(self["cone.variant"]), self["cone.dimension"], parse_angle(self["cone.angle"]),
                                int(self["cone.mesh"]))

    def form(self) -> HarmonicForm:
        return HarmonicForm(self.cone())

    def law(self) -> IncrementLaw:
        return IncrementLaw.from_config(str(self["law.variant"]), self.cone().dimension, self["law.tail_index"])

    def start(self) -> list[float]:
        x = self["points.x"]
        if x is None:
            cone = self.cone()
            x0, _ = cone.starlike_data()
            return [float(v) for v in x0 * 2.0]
        return [float(v) for v in (x if isinstance(x, list) else [x])]

    def start_list(self) -> list[list[float]]:
        xs = self["points.x_list"]
        return [self.start()] if xs is None else [[float(v) for v in x] for x in xs]

    @property
    def seed(self) -> int:
        return int(self["run.seed"])

    @property
    def samples(self) -> int:
        return int(self["run.samples"])

    @property
    def threads(self) -> int:
        return int(self["run.threads"])

    @property
    def out(self) -> Path:
        return Path(str(self["run.out"]))

    @property
    def stages(self) -> list[str]:
        st = self["run.stages"]
        return [st] if isinstance(st, str) else list(st)

    # ---- validation ----------------------------------------------------------

    def validate(self, stages=None) -> list[str]:
        """Raise :class:`ConfigError` on invalid settings; return warnings."""
        notes = []
        unknown = sorted(k for k in self.values if k not in DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown keys: {', '.join(unknown)}")
        try:
            cone = self.cone()
            law = self.law()
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from None
        stages = list(stages if stages is not None else self.stages)
        bad = [s for s in stages if s not in STAGES]
        if bad:
            raise ConfigError(f"unknown stages: {', '.join(bad)}")
        if self.samples < 1:
            raise ConfigError("run.samples must be positive")
        if self.threads < 1:
            raise ConfigError("run.threads must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("run.seed must be an unsigned 64-bit integer")
        for key in ("grid.n", "grid.k"):
            g = self[key]
            if not isinstance(g, list) or any(int(v) != v or v < 1 for v in g) or \
                    any(b <= a for a, b in zip(g, g[1:])):
                raise ConfigError(f"{key} must be a strictly increasing list of positive integers")
        gn, gk = self["grid.n"], self["grid.k"]
        if "tail-fit" in stages and (len(gn) < 3 or gn[-1] < 100 * gn[0]):
            raise ConfigError("grid.n needs at least 3 points spanning two decades for tail-fit")
        needs_k = "kappa-trace" in stages or ("estimate-v" in stages and int(self["v.construction"]) == 1)
        if needs_k and (len(gk) < 4 or gk[-1] < 100 * gk[0]):
            raise ConfigError("grid.k needs at least 4 points spanning two decades")
        for x in self.start_list() + [self.start()]:
            if len(x) != cone.dimension:
                raise ConfigError(f"starting point {x} has the wrong dimension for {cone.label}")
            if not cone.contains(x):
                raise ConfigError(f"starting point {x} is not inside {cone.label}")
        p = cone.p
        beta = self["probe.beta"]
        if beta is not None and not 0 < float(beta) < p:
            raise ConfigError(f"probe.beta={beta} violates 0 < beta < p={p:g}")
        t_exp = self["probe.t_exp"]
        if t_exp is not None and float(t_exp) > law.moment_order:
            raise ConfigError(f"probe.t_exp={t_exp} exceeds the moment order of {law.label}")
        gamma = self["shift.gamma"]
        if gamma is not None and not 0 < float(gamma) < min(0.5, p):
            raise ConfigError(f"shift.gamma={gamma} violates 0 < gamma < min(1/2, p)={min(0.5, p):g}")
        eps = float(self["schedule.epsilon"])
        if not 0 < eps < 0.5:
            raise ConfigError("schedule.epsilon must lie in (0, 1/2)")
        if int(self["schedule.n0"]) < 32 and "estimate-v" in stages and int(self["v.construction"]) == 2:
            raise ConfigError("schedule.n0 must be at least 32")
        if int(self["v.construction"]) not in (1, 2):
            raise ConfigError("v.construction must be 1 or 2")
        if "local-clt" in stages and not law.lattice:
            raise ConfigError("local-clt needs a lattice law (rademacher)")
        if not law.satisfies_moment_condition(p):
            msg = f"{law.label} has moment order {law.moment_order:g}, short of what exponent p={p:g} needs"
            warnings.warn(msg, stacklevel=2)
            notes.append(msg)
        return notes
