"""Run configuration: TOML loading, defaults, validation, and echoing.

An empty config file runs the full desk-scale comparison with the default
tuning; every key below can be overridden. Unknown sections or keys are
rejected so typos cannot silently fall back to defaults. Each run echoes
the fully resolved configuration beside its outputs, and re-running from
that echo reproduces the run bit for bit.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from importlib import resources

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .errors import ConfigurationError, ParseError
from .harness import RaceSetup
from .nlp import SolverSettings
from .planner import HorizonConfig, PlannerWeights
from .track import Centerline, load_centerline, read_track_csv
from .vehicle import VehicleParams
from .velocity import MappingParams, VelocityBounds

BUILTIN_PREFIX = "builtin:"
BUILTIN_TRACKS = ("stadium_chicane",)

DEFAULTS = {
    "run": {
        "mode": "compare",
        "track": "builtin:stadium_chicane",
        "n_laps": 5,
        "seed": 2024,
        "output_dir": "out",
        "resample_spacing": 0.0,
        "maf_window": 9,
    },
    "horizon": {
        "n_p": 10,
        "n_c": 10,
        "t_s": 0.05,
        "boundary_margin": 0.15,
        "state_lower": [-1e9, -1e9, -1e9, -1e9],
        "state_upper": [1e9, 1e9, 1e9, 1e9],
        "input_lower": [-10.0, -0.35, -10.0],
        "input_upper": [10.0, 0.35, 10.0],
    },
    "weights": {
        "q_con": 800.0,
        "q_lag": 800.0,
        "gamma": 40.0,
        "r1": [10.0, 3500.0, 0.0],
        "u_ref": [3.3, 0.0, 3.0],
        "r2_mpcc": [40.0, 10.0, 40.0],
        "r2_cimpcc": [0.0, 10.0, 0.0],
        "r3": [40.0, 40.0],
        "slack_penalty": 1e4,
        "anchor_du0": True,
    },
    "mapping": {"alpha": 3.0},
    "velocity": {"v_bar": [4.18, 3.8], "v_under": [2.72, 2.47]},
    "vehicle": {"wheelbase": 0.324},
    # max_wall_time is slack by default: a binding wall-clock cutoff would
    # make simulated races depend on machine load. Solve times are still
    # measured per cycle and summarized by the report command.
    "solver": {
        "kkt_tolerance": 1e-6,
        "max_iterations": 100,
        "max_wall_time": 1.0,
        "hessian_strategy": "gauss_newton",
    },
    "disturbance": {"std_v_l": 0.0, "std_delta": 0.0},
}

MODES = ("mpcc", "cimpcc", "compare")


@dataclass
class RunConfig:
    """Fully resolved run settings, ready to build planner objects from."""

    values: dict
    base_dir: str = "."

    @property
    def mode(self) -> str:
        return self.values["run"]["mode"]

    @property
    def n_laps(self) -> int:
        return self.values["run"]["n_laps"]

    @property
    def seed(self) -> int:
        return self.values["run"]["seed"]

    @property
    def output_dir(self) -> str:
        out = self.values["run"]["output_dir"]
        return out if os.path.isabs(out) else os.path.join(self.base_dir, out)

    @property
    def maf_window(self) -> int:
        return self.values["run"]["maf_window"]

    @property
    def resample_spacing(self) -> float | None:
        spacing = self.values["run"]["resample_spacing"]
        return spacing if spacing > 0 else None

    def load_track(self) -> Centerline:
        return load_track(self.values["run"]["track"], self.base_dir, self.resample_spacing)

    def build_setup(self) -> RaceSetup:
        v = self.values
        w = v["weights"]
        shared = dict(
            q_con=w["q_con"],
            q_lag=w["q_lag"],
            gamma=w["gamma"],
            r1=tuple(w["r1"]),
            u_ref=tuple(w["u_ref"]),
            slack_penalty=w["slack_penalty"],
            anchor_du0=w["anchor_du0"],
        )
        return RaceSetup(
            horizon=HorizonConfig(
                n_p=v["horizon"]["n_p"],
                n_c=v["horizon"]["n_c"],
                t_s=v["horizon"]["t_s"],
                boundary_margin=v["horizon"]["boundary_margin"],
                state_lower=tuple(v["horizon"]["state_lower"]),
                state_upper=tuple(v["horizon"]["state_upper"]),
                input_lower=tuple(v["horizon"]["input_lower"]),
                input_upper=tuple(v["horizon"]["input_upper"]),
            ),
            bounds=VelocityBounds(
                v_bar=tuple(v["velocity"]["v_bar"]),
                v_under=tuple(v["velocity"]["v_under"]),
            ),
            mapping=MappingParams(alpha=v["mapping"]["alpha"]),
            vehicle=VehicleParams(wheelbase=v["vehicle"]["wheelbase"]),
            solver=SolverSettings(
                kkt_tolerance=v["solver"]["kkt_tolerance"],
                max_iterations=v["solver"]["max_iterations"],
                max_wall_time=v["solver"]["max_wall_time"],
                hessian_strategy=v["solver"]["hessian_strategy"],
            ),
            weights_mpcc=PlannerWeights(r2=tuple(w["r2_mpcc"]), r3=(0.0, 0.0), **shared),
            weights_cimpcc=PlannerWeights(r2=tuple(w["r2_cimpcc"]), r3=tuple(w["r3"]), **shared),
            disturbance_std_v_l=v["disturbance"]["std_v_l"],
            disturbance_std_delta=v["disturbance"]["std_delta"],
        )


def load_track(spec: str, base_dir: str = ".", resample_spacing: float | None = None) -> Centerline:
    """Resolve a track reference: ``builtin:<name>`` or a CSV path."""
    if spec.startswith(BUILTIN_PREFIX):
        name = spec[len(BUILTIN_PREFIX) :]
        if name not in BUILTIN_TRACKS:
            raise ConfigurationError(
                f"unknown builtin track {name!r}; available: {', '.join(BUILTIN_TRACKS)}"
            )
        text = resources.files("cimpcc").joinpath(f"data/{name}.csv").read_text(encoding="utf-8")
        return load_centerline(text, resample_spacing=resample_spacing)
    path = spec if os.path.isabs(spec) else os.path.join(base_dir, spec)
    return read_track_csv(path, resample_spacing=resample_spacing)


def _merge_checked(defaults: dict, overrides: dict, path: str = "") -> dict:
    merged = {}
    for key, default in defaults.items():
        if key in overrides:
            value = overrides[key]
            if isinstance(default, dict):
                if not isinstance(value, dict):
                    raise ConfigurationError(f"'{path}{key}' must be a table")
                merged[key] = _merge_checked(default, value, f"{path}{key}.")
            else:
                merged[key] = _coerce(default, value, f"{path}{key}")
        else:
            merged[key] = dict(default) if isinstance(default, dict) else default
    unknown = set(overrides) - set(defaults)
    if unknown:
        raise ConfigurationError(
            f"unknown config key(s): {', '.join(sorted(path + k for k in unknown))}"
        )
    return merged


def _coerce(default, value, key):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigurationError(f"'{key}' must be a boolean")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
            raise ConfigurationError(f"'{key}' must be an integer")
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"'{key}' must be a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigurationError(f"'{key}' must be a string")
        return value
    if isinstance(default, list):
        if not isinstance(value, list) or len(value) != len(default):
            raise ConfigurationError(f"'{key}' must be a list of {len(default)} numbers")
        return [float(x) for x in value]
    raise ConfigurationError(f"unsupported config key '{key}'")  # pragma: no cover


def load_config(path: str) -> RunConfig:
    """Read and validate a TOML run configuration.

    The ``CIMPCC_SEED`` environment variable, when set, overrides the
    configured seed.
    """
    if not os.path.exists(path):
        raise ParseError(f"config file not found: {path}")
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ParseError(f"malformed config {path}: {exc}") from None
    values = _merge_checked(DEFAULTS, raw)
    if values["run"]["mode"] not in MODES:
        raise ConfigurationError(
            f"run.mode must be one of {', '.join(MODES)}, got {values['run']['mode']!r}"
        )
    if values["run"]["n_laps"] < 0:
        raise ConfigurationError("run.n_laps must be nonnegative")
    if values["run"]["maf_window"] < 1 or values["run"]["maf_window"] % 2 == 0:
        raise ConfigurationError("run.maf_window must be a positive odd integer")
    env_seed = os.environ.get("CIMPCC_SEED")
    if env_seed is not None:
        try:
            values["run"]["seed"] = int(env_seed)
        except ValueError:
            raise ConfigurationError(f"CIMPCC_SEED must be an integer, got {env_seed!r}") from None
    cfg = RunConfig(values=values, base_dir=os.path.dirname(os.path.abspath(path)))
    track = values["run"]["track"]
    if not track.startswith(BUILTIN_PREFIX):
        resolved = track if os.path.isabs(track) else os.path.join(cfg.base_dir, track)
        if not os.path.exists(resolved):
            raise ConfigurationError(f"track file not found: {resolved}")
    return cfg


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, list):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise TypeError(f"cannot serialize {value!r}")  # pragma: no cover


def echo_config(cfg: RunConfig, path: str):
    """Write the fully resolved configuration (absolute paths) as TOML."""
    values = {section: dict(body) for section, body in cfg.values.items()}
    track = values["run"]["track"]
    if not track.startswith(BUILTIN_PREFIX) and not os.path.isabs(track):
        values["run"]["track"] = os.path.abspath(os.path.join(cfg.base_dir, track))
    values["run"]["output_dir"] = os.path.abspath(cfg.output_dir)
    lines = []
    for section, body in values.items():
        lines.append(f"[{section}]")
        for key, value in body.items():
            lines.append(f"{key} = {_toml_value(value)}")
        lines.append("")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))
