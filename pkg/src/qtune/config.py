"""Experiment configuration files.

Configs are TOML documents::

    spec_version = 1
    seeds = [1, 2, 3]            # or: seed = 1
    out = "runs/cnn"             # optional; --out and $QTUNE_OUT_DIR also work
    timing = false               # write wall-clock ms into traces (breaks byte-identity)

    [space]
    preset = "cnn"               # or a list of [[space.dimension]] tables:
    # [[space.dimension]]
    # name = "lr"
    # values = [0.001, 0.01]
    # encoding = "scalar"        # or "one-hot"

    [surface]
    kind = "random_smooth"       # tabular | quadratic | random_smooth
    seed = 7                     # random_smooth; derived from the run seed if absent
    smoothness = 1.0
    # path = "table.csv"         # tabular, relative to the config file
    # optimum = [0, 1, 2, 0, 3, 1]  curvature = 1.0   (quadratic)
    direction = "maximize"
    metafeatures = [0, 0, 0, 0, 0, 0, 0, 0]   # optional, Hyp-RL only

    [policy]
    kind = "epsilon_greedy"      # or "softmax"
    epsilon = 0.1
    temperature = 0.1

    [[agent]]
    name = "qi"                  # qi | random | grid | hyprl
    budget = 200

Every validation error carries the line number of the offending key.
"""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .bench import (
    Direction,
    MetaFeatures,
    QuadraticSurface,
    RandomSmoothSurface,
    Surface,
    SurfaceError,
    load_tabular,
)
from .policy import Policy, make_policy
from .space import Configuration, Dimension, SearchSpace, cnn_grid, lstm_grid

SPEC_VERSION = 1
AGENTS = ("qi", "random", "grid", "hyprl")
PRESETS = {"cnn": cnn_grid, "lstm": lstm_grid}

_AGENT_KEYS = {
    "qi": {"budget", "alpha", "gamma", "threshold", "invert_break", "q_init"},
    "random": {"budget"},
    "grid": {"limit"},
    "hyprl": {"episodes", "actions_per_episode", "gamma", "target_update_every",
              "buffer_capacity", "minibatch_size", "learning_rate", "hidden",
              "activation", "epsilon_final", "find_iters"},
}


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        super().__init__(message)

    def __str__(self) -> str:
        loc = self.path or "<config>"
        if self.line is not None:
            loc += f":{self.line}"
        return f"{loc}: {self.args[0]}"


@dataclass
class AgentSpec:
    name: str
    params: dict[str, Any]
    line: int | None = None


@dataclass
class ExperimentConfig:
    space: SearchSpace
    surface: dict[str, Any]
    agents: list[AgentSpec]
    policy: dict[str, Any]
    seeds: list[int]
    out: str | None = None
    timing: bool = False
    base_dir: Path = field(default_factory=Path.cwd)
    text: str = ""
    path: str | None = None

    def make_policy(self) -> Policy:
        return make_policy(
            self.policy.get("kind", "epsilon_greedy"),
            epsilon=float(self.policy.get("epsilon", 0.1)),
            temperature=float(self.policy.get("temperature", 0.1)),
        )

    def build_surface(self, surface_rng=None) -> Surface:
        """Instantiate the declared surface.

        ``surface_rng`` supplies the random-smooth seed when the config omits one.
        """
        spec = self.surface
        kind = spec["kind"]
        direction = spec.get("direction", "maximize")
        if kind == "tabular":
            return self._load_table()
        if kind == "quadratic":
            return QuadraticSurface(self.space, Configuration(spec["optimum"]),
                                    float(spec.get("curvature", 1.0)), direction)
        seed = spec.get("seed")
        if seed is None:
            if surface_rng is None:
                raise ConfigError("random_smooth surface needs a seed",
                                  self.line_of("kind", "surface"), self.path)
            seed = int(surface_rng.integers(2**31))
        return RandomSmoothSurface(self.space, int(seed), float(spec.get("smoothness", 1.0)),
                                   direction)

    def _load_table(self) -> Surface:
        path = self.base_dir / self.surface["path"]
        line = self.line_of("path", "surface")
        try:
            surface = load_tabular(path)
        except OSError as exc:
            raise ConfigError(f"cannot read tabular surface {path}: {exc.strerror}",
                              line, self.path) from None
        except SurfaceError as exc:
            raise ConfigError(f"tabular surface {path}: {exc}", line, self.path) from None
        if surface.space != self.space:
            raise ConfigError(f"tabular surface {path} does not match the declared space",
                              line, self.path)
        if "direction" in self.surface and \
                surface.direction is not Direction.parse(self.surface["direction"]):
            raise ConfigError("surface direction disagrees with the tabular file header",
                              self.line_of("direction", "surface"), self.path)
        return surface

    def metafeatures(self) -> MetaFeatures:
        if "metafeatures" in self.surface:
            return MetaFeatures(self.surface["metafeatures"])
        return MetaFeatures.zeros()

    def line_of(self, key: str, section: str | None = None) -> int | None:
        return locate(self.text, key, section)


def locate(text: str, key: str, section: str | None = None) -> int | None:
    """1-based line of ``key = ...`` in ``[section]``, or at top level when
    ``section`` is None."""
    current = None
    key_re = re.compile(rf"^\s*{re.escape(key)}\s*=")
    for i, line in enumerate(text.splitlines(), start=1):
        m = re.match(r"^\s*\[\[?\s*([\w.]+)\s*\]?\]", line)
        if m:
            current = m.group(1)
            continue
        if key_re.match(line):
            if current == section or (section and (current or "").startswith(section + ".")):
                return i
    return None


def _section_line(text: str, section: str, nth: int = 0) -> int | None:
    hits = [i for i, line in enumerate(text.splitlines(), start=1)
            if re.match(rf"^\s*\[\[?\s*{re.escape(section)}\s*\]?\]", line)]
    return hits[nth] if nth < len(hits) else None


def _key_in_table(text: str, header_line: int | None, key: str) -> int | None:
    """Line of ``key`` inside the table starting at ``header_line``; the header if absent."""
    if header_line is None:
        return None
    lines = text.splitlines()
    key_re = re.compile(rf"^\s*{re.escape(key)}\s*=")
    for i in range(header_line, len(lines)):
        if re.match(r"^\s*\[", lines[i]):
            break
        if key_re.match(lines[i]):
            return i + 1
    return header_line


def parse_config(text: str, path: str | None = None, base_dir: Path | None = None) -> ExperimentConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"syntax error: {exc}", int(m.group(1)) if m else None, path) from None

    def fail(msg: str, key: str = "", section: str | None = None) -> ConfigError:
        line = locate(text, key, section) if key else _section_line(text, section or "")
        return ConfigError(msg, line, path)

    if doc.get("spec_version") != SPEC_VERSION:
        raise fail(f"spec_version must be {SPEC_VERSION}", "spec_version")

    space = _parse_space(doc.get("space"), text, path)

    surface = doc.get("surface")
    if not isinstance(surface, dict):
        raise ConfigError("missing [surface] section", None, path)
    kind = surface.get("kind")
    if kind not in ("tabular", "quadratic", "random_smooth"):
        raise fail(f"surface kind {kind!r} is not tabular|quadratic|random_smooth", "kind", "surface")
    if kind == "tabular" and "path" not in surface:
        raise fail("tabular surface needs a path", "kind", "surface")
    if kind == "quadratic":
        opt = surface.get("optimum")
        try:
            space.check(Configuration(opt))
        except (TypeError, ValueError) as exc:
            raise fail(f"invalid quadratic optimum: {exc}", "optimum", "surface") from None
        if not float(surface.get("curvature", 1.0)) > 0:
            raise fail("curvature must be positive", "curvature", "surface")
    if kind == "random_smooth" and not float(surface.get("smoothness", 1.0)) > 0:
        raise fail("smoothness must be positive", "smoothness", "surface")
    try:
        Direction.parse(surface.get("direction", "maximize"))
    except ValueError as exc:
        raise fail(str(exc), "direction", "surface") from None
    if "metafeatures" in surface:
        try:
            MetaFeatures(surface["metafeatures"])
        except (TypeError, ValueError) as exc:
            raise fail(str(exc), "metafeatures", "surface") from None

    policy = doc.get("policy", {})
    try:
        make_policy(policy.get("kind", "epsilon_greedy"), float(policy.get("epsilon", 0.1)),
                    float(policy.get("temperature", 0.1)))
    except ValueError as exc:
        key = next((k for k in ("kind", "epsilon", "temperature") if k in policy), "")
        raise fail(str(exc), key, "policy") from None

    raw_agents = doc.get("agent")
    if isinstance(raw_agents, dict):
        raw_agents = [raw_agents]
    if not raw_agents:
        raise ConfigError("no [[agent]] declared", None, path)
    agents = []
    for n, a in enumerate(raw_agents):
        line = _section_line(text, "agent", n)
        name = a.get("name")
        if name not in AGENTS:
            raise ConfigError(f"unknown agent {name!r}; expected one of {', '.join(AGENTS)}",
                              _key_in_table(text, line, "name"), path)
        params = {k: v for k, v in a.items() if k != "name"}
        unknown = set(params) - _AGENT_KEYS[name]
        if unknown:
            first = min(unknown, key=lambda k: _key_in_table(text, line, k) or 0)
            raise ConfigError(f"unknown {name} parameters: {', '.join(sorted(unknown))}",
                              _key_in_table(text, line, first), path)
        for k in ("budget", "episodes", "actions_per_episode", "find_iters"):
            if k in params and (not isinstance(params[k], int) or params[k] < 1):
                raise ConfigError(f"{k} must be a positive integer",
                                  _key_in_table(text, line, k), path)
        for k in ("gamma", "alpha"):
            if k in params and not 0.0 <= float(params[k]) <= 1.0:
                raise ConfigError(f"{k} must lie in [0, 1]", _key_in_table(text, line, k), path)
        agents.append(AgentSpec(name, params, line))

    if "seeds" in doc:
        seeds = doc["seeds"]
        if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) for s in seeds):
            raise fail("seeds must be a non-empty list of integers", "seeds")
    else:
        seed = doc.get("seed", 0)
        if not isinstance(seed, int):
            raise fail("seed must be an integer", "seed")
        seeds = [seed]

    cfg = ExperimentConfig(
        space=space, surface=surface, agents=agents, policy=policy, seeds=list(seeds),
        out=doc.get("out"), timing=bool(doc.get("timing", False)),
        base_dir=base_dir or Path.cwd(), text=text, path=path,
    )
    if kind == "tabular":
        cfg._load_table()
    return cfg


def _parse_space(spec: Any, text: str, path: str | None) -> SearchSpace:
    if not isinstance(spec, dict):
        raise ConfigError("missing [space] section", None, path)
    if "preset" in spec:
        preset = spec["preset"]
        if preset not in PRESETS:
            raise ConfigError(f"unknown space preset {preset!r}; expected cnn|lstm",
                              locate(text, "preset", "space"), path)
        return PRESETS[preset]()
    dims = spec.get("dimension")
    if not dims:
        raise ConfigError("space declares no dimensions", _section_line(text, "space"), path)
    out = []
    for n, d in enumerate(dims):
        try:
            out.append(Dimension(d["name"], tuple(d["values"]), d.get("encoding", "one-hot")))
        except KeyError as exc:
            raise ConfigError(f"dimension missing key {exc}", _section_line(text, "space.dimension", n),
                              path) from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), _section_line(text, "space.dimension", n), path) from None
    try:
        return SearchSpace(out)
    except ValueError as exc:
        raise ConfigError(str(exc), _section_line(text, "space"), path) from None


def load_config(path: str | Path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(path)) from None
    return parse_config(text, str(path), p.parent)
