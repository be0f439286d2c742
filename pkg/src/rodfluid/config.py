"""key = value run configuration files.

Lines hold ``key = value`` pairs; ``#`` starts a comment.  Unknown keys are
rejected so typos fail loudly.  The eleven model keys are required; seed
defaults to 12345; everything else is verb-specific and optional.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .model import LatticeGeometry, Params

DEFAULT_SEED = 12345


class ConfigError(ValueError):
    def __init__(self, key: str, constraint: str):
        self.key = key
        self.constraint = constraint
        super().__init__(f"config key '{key}': {constraint}")


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "on", "yes"):
        return True
    if t in ("0", "false", "off", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_choice(*options):
    def parse(text):
        t = text.strip()
        if t not in options:
            raise ValueError(f"must be one of {options}")
        return t

    return parse


def _parse_list(elem):
    def parse(text):
        items = [s for s in (piece.strip() for piece in text.split(",")) if s]
        if not items:
            raise ValueError("empty list")
        return [elem(s) for s in items]

    return parse


_MODEL_KEYS = {
    "p": float,
    "q": float,
    "a": float,
    "b": float,
    "gamma1": float,
    "gamma2": float,
    "kappa": float,
    "N": int,
    "width": int,
    "vmin": int,
    "vmax": int,
}

_EXTRA_KEYS = {
    "seed": int,
    "t_end": float,
    "y0": int,
    "mode": _parse_choice("exact", "stirred"),
    "stirred_vertical": _parse_bool,
    "replicas": int,
    "times": _parse_list(float),
    "snapshot_times": _parse_list(float),
    "gamma1_sweep": _parse_list(float),
    "events": int,
    "dt": float,
    "rho_bottom": float,
    "rho_top": float,
    "n_sweep": _parse_list(int),
    "kappa_sweep": _parse_list(float),
    "tag_col": int,
    "tag_y": int,
    "log_events": _parse_bool,
}


@dataclass
class RunConfig:
    params: Params
    geometry: LatticeGeometry
    seed: int
    extras: dict = field(default_factory=dict)

    def echo(self) -> dict:
        """Flat dict of all effective settings, for output manifests."""
        out = {
            "p": self.params.p,
            "q": self.params.q,
            "a": self.params.a,
            "b": self.params.b,
            "gamma1": self.params.gamma1,
            "gamma2": self.params.gamma2,
            "kappa": self.params.kappa,
            "N": self.params.N,
            "width": self.geometry.width,
            "vmin": self.geometry.vmin,
            "vmax": self.geometry.vmax,
            "seed": self.seed,
        }
        out.update(self.extras)
        return out


def parse_config_text(text: str) -> RunConfig:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}", f"expected key = value, got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if key in raw:
            raise ConfigError(key, "duplicate key")
        raw[key] = value

    values: dict = {}
    for key, text_value in raw.items():
        parser = _MODEL_KEYS.get(key) or _EXTRA_KEYS.get(key)
        if parser is None:
            raise ConfigError(key, "unknown key")
        try:
            values[key] = parser(text_value)
        except ValueError as exc:
            raise ConfigError(key, f"bad value {text_value!r} ({exc})") from None

    missing = [k for k in _MODEL_KEYS if k not in values]
    if missing:
        raise ConfigError(missing[0], "required key missing")

    try:
        params = Params(
            p=values["p"], q=values["q"], a=values["a"], b=values["b"],
            gamma1=values["gamma1"], gamma2=values["gamma2"],
            kappa=values["kappa"], N=values["N"],
        )
    except ValueError as exc:
        raise ConfigError("p/q/a/b/gamma1/gamma2/kappa/N", str(exc)) from None
    try:
        geometry = LatticeGeometry(
            width=values["width"], vmin=values["vmin"], vmax=values["vmax"]
        )
        geometry.require_fits(params.N)
    except ValueError as exc:
        raise ConfigError("width/vmin/vmax", str(exc)) from None

    seed = values.get("seed", DEFAULT_SEED)
    extras = {
        k: v for k, v in values.items() if k not in _MODEL_KEYS and k != "seed"
    }
    return RunConfig(params=params, geometry=geometry, seed=seed, extras=extras)


def parse_config_file(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())
