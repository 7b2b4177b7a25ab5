"""Experiment configuration: JSON schema, presets and hashing.

Nothing is read from the environment; a run is fully described by its
config file plus the CLI flags that override it.
"""
import hashlib
import json
import math
from dataclasses import dataclass, field, replace

from exceptions import ConfigError
from montecarlo import DEFAULT_CHUNK, DEFAULT_SEED, DEFAULT_SHOTS, McConfig

APP_NAME = "cv-distill"
APP_VERSION = "1.0.0"

ENGINES = ("analytic", "mc", "both")
DEFAULT_THRESHOLDS = tuple(0.5 * k for k in range(25))
NO_THRESHOLD = -1e9
CALIBRATION_TARGETS = {"ln_initial": 0.76, "ln_discrete_premix": -1.63}
MC_DEFAULTS = {
    "n_shots": DEFAULT_SHOTS,
    "seed": DEFAULT_SEED,
    "workers": 1,
    "histogram_bins": 201,
    "histogram_range": 25.0,
    "chunk_size": DEFAULT_CHUNK,
}
OUTPUT_DEFAULTS = {"directory": "results", "json": True, "csv": True}


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    source: dict
    channel: dict
    thresholds: tuple
    reflectivity: float = 0.07
    engine: str = "analytic"
    mc: dict = field(default_factory=lambda: dict(MC_DEFAULTS))
    output: dict = field(default_factory=lambda: dict(OUTPUT_DEFAULTS))

    @property
    def calibrates_source(self):
        return "calibrate_to" in self.source

    def mc_config(self, threshold_x=0.0):
        return McConfig(threshold_x=threshold_x, **self.mc)

    def with_overrides(self, engine=None, shots=None, seed=None, workers=None, out=None):
        """Apply CLI flag overrides; ``None`` leaves the config value."""
        mc = dict(self.mc)
        if shots is not None:
            mc["n_shots"] = shots
        if seed is not None:
            mc["seed"] = seed
        if workers is not None:
            mc["workers"] = workers
        output = dict(self.output)
        if out is not None:
            output["directory"] = str(out)
        return parse_config(replace(self, engine=engine or self.engine, mc=mc, output=output).to_dict())

    def to_dict(self):
        return {
            "name": self.name,
            "source": json.loads(json.dumps(self.source)),
            "channel": json.loads(json.dumps(self.channel)),
            "tap": {"reflectivity": self.reflectivity, "thresholds": list(self.thresholds)},
            "engine": self.engine,
            "mc": dict(self.mc),
            "output": dict(self.output),
        }


# =============== PARSING ===============
def _object(value, where, allowed, required=()):
    if not isinstance(value, dict):
        raise ConfigError(f"{where} must be an object")
    unknown = set(value) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    missing = [k for k in required if k not in value]
    if missing:
        raise ConfigError(f"missing keys in {where}: {missing}")
    return value


def _number(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"{where} must be a finite number, got {value!r}")
    return float(value)


def _integer(value, where, minimum=1):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ConfigError(f"{where} must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"{where} must be at least {minimum}, got {value}")
    return int(value)


def _parse_source(source):
    _object(source, "source", {"v_squeezed", "v_antisqueezed", "calibrate_to"})
    explicit = {"v_squeezed", "v_antisqueezed"} & set(source)
    if ("calibrate_to" in source) == bool(explicit):
        raise ConfigError("source needs exactly one of explicit variances or 'calibrate_to'")
    if "calibrate_to" in source:
        targets = _object(source["calibrate_to"], "source.calibrate_to",
                          {"ln_initial", "ln_discrete_premix"}, required=("ln_initial", "ln_discrete_premix"))
        return {"calibrate_to": {k: _number(v, f"source.calibrate_to.{k}") for k, v in targets.items()}}
    _object(source, "source", explicit, required=("v_squeezed", "v_antisqueezed"))
    return {k: _number(source[k], f"source.{k}") for k in ("v_squeezed", "v_antisqueezed")}


def _parse_channel(channel):
    if not isinstance(channel, dict):
        raise ConfigError("channel must be an object")
    if "levels" in channel:
        _object(channel, "channel", {"levels"})
        if not isinstance(channel["levels"], list) or not channel["levels"]:
            raise ConfigError("channel.levels must be a non-empty list")
        levels = []
        for n, level in enumerate(channel["levels"]):
            _object(level, f"channel.levels[{n}]", {"t", "p"}, required=("t", "p"))
            levels.append({"t": _number(level["t"], "t"), "p": _number(level["p"], "p")})
        return {"levels": levels}
    preset = channel.get("preset")
    if preset == "discrete":
        _object(channel, "channel", {"preset"})
        return {"preset": "discrete"}
    if preset == "semicontinuous":
        _object(channel, "channel", {"preset", "beta", "ln_premix", "p_full", "n_levels"})
        if "beta" in channel and "ln_premix" in channel:
            raise ConfigError("channel takes either 'beta' or 'ln_premix', not both")
        parsed = {"preset": "semicontinuous",
                  "p_full": _number(channel.get("p_full", 0.2), "channel.p_full"),
                  "n_levels": _integer(channel.get("n_levels", 45), "channel.n_levels", minimum=2)}
        for key in ("beta", "ln_premix"):
            if key in channel:
                parsed[key] = _number(channel[key], f"channel.{key}")
        return parsed
    raise ConfigError(f"channel needs 'levels' or a known 'preset', got {preset!r}")


def parse_config(data):
    """Validate a config mapping and fill in defaults."""
    _object(data, "config", {"name", "source", "channel", "tap", "engine", "mc", "output"},
            required=("source", "channel", "tap"))
    tap = _object(data["tap"], "tap", {"reflectivity", "thresholds"}, required=("thresholds",))
    thresholds = tap["thresholds"]
    if not isinstance(thresholds, list) or not thresholds:
        raise ConfigError("tap.thresholds must be a non-empty list")
    reflectivity = _number(tap.get("reflectivity", 0.07), "tap.reflectivity")
    if not 0.0 <= reflectivity < 1.0:
        raise ConfigError(f"tap.reflectivity must lie in [0, 1), got {reflectivity}")

    engine = data.get("engine", "analytic")
    if engine not in ENGINES:
        raise ConfigError(f"engine must be one of {ENGINES}, got {engine!r}")

    mc_raw = _object(data.get("mc", {}), "mc", set(MC_DEFAULTS))
    mc = dict(MC_DEFAULTS)
    for key, value in mc_raw.items():
        if key == "histogram_range":
            mc[key] = _number(value, "mc.histogram_range")
        else:
            mc[key] = _integer(value, f"mc.{key}", minimum=0 if key == "seed" else 1)
    try:
        McConfig(**mc)
    except ConfigError as exc:
        raise ConfigError(f"invalid mc section: {exc}") from exc

    out_raw = _object(data.get("output", {}), "output", set(OUTPUT_DEFAULTS))
    output = {**OUTPUT_DEFAULTS, **out_raw}
    if not isinstance(output["directory"], str) or not output["directory"]:
        raise ConfigError("output.directory must be a non-empty string")
    if not isinstance(output["json"], bool) or not isinstance(output["csv"], bool):
        raise ConfigError("output.json and output.csv must be booleans")

    name = data.get("name", "scenario")
    if not isinstance(name, str) or not name:
        raise ConfigError("name must be a non-empty string")

    return ExperimentConfig(
        name=name,
        source=_parse_source(data["source"]),
        channel=_parse_channel(data["channel"]),
        thresholds=tuple(_number(t, "tap.thresholds[]") for t in thresholds),
        reflectivity=reflectivity,
        engine=engine,
        mc=mc,
        output=output,
    )


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(data)


def config_hash(config):
    canonical = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# =============== PRESETS ===============
def preset_config(name):
    """Built-in scenarios: the perfect, discrete and semi-continuous channels."""
    source = {"calibrate_to": dict(CALIBRATION_TARGETS)}
    presets = {
        "perfect": {"channel": {"levels": [{"t": 1.0, "p": 1.0}]},
                    "thresholds": [NO_THRESHOLD], "reflectivity": 0.0},
        "discrete": {"channel": {"preset": "discrete"},
                     "thresholds": list(DEFAULT_THRESHOLDS), "reflectivity": 0.07},
        "semicontinuous": {"channel": {"preset": "semicontinuous", "ln_premix": -0.11, "p_full": 0.2},
                           "thresholds": list(DEFAULT_THRESHOLDS), "reflectivity": 0.07},
    }
    if name not in presets:
        raise ConfigError(f"unknown preset {name!r}, choose from {sorted(presets)}")
    preset = presets[name]
    return parse_config({
        "name": name,
        "source": source,
        "channel": preset["channel"],
        "tap": {"reflectivity": preset["reflectivity"], "thresholds": preset["thresholds"]},
        "output": {"directory": f"results/{name}"},
    })


PRESET_NAMES = ("perfect", "discrete", "semicontinuous")
