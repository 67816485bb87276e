"""
Experiment configuration: JSON loading and validation.

See ``docs/config.md`` for the full schema. Unknown keys are rejected at
every level.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .grid import FieldGrid, load_grid
from .metrics import DEFAULT_BAND_EDGES
from .sensing import NoiseModel
from .sparse import SolverOptions
from .synth import INTAKE_DEPTHS, StratificationParams

METHODS = ("gappy_pod", "sparse_raw", "sparse_pod", "robust_sparse")
LINE_PLACEMENTS = ("surface_line", "vertical_dam_line")

_TOP_KEYS = {
    "data_source",
    "methods",
    "k_list",
    "p_list",
    "placement",
    "placements",
    "sensors",
    "conditions",
    "trials",
    "seed",
    "noise",
    "epsilon",
    "rescale",
    "solver",
    "band_edges",
    "output_dir",
}
_SYNTH_KEYS = {"grid", "base", "spread", "test_spread", "n_train", "train_seed"}
_FILE_KEYS = {"snapshots", "grid", "test_rows"}
_GRID_KEYS = {"nx", "nz", "dx_m", "dz_m"}
_NOISE_KEYS = {"gaussian_sigma", "corruption_fraction", "corruption_scale"}

#: synthetic source used when a config omits ``data_source``
DEFAULT_SYNTHETIC = {
    "grid": {"nx": 60, "nz": 30, "dx_m": 3000.0, "dz_m": 2.0},
    "base": {"t_surface": 22.0, "t_bottom": 6.0, "thermocline_depth": 25.0, "thermocline_width": 2.0},
    "spread": {"day_of_year": [120.0, 300.0], "intake_choices": list(INTAKE_DEPTHS)},
    "test_spread": {"day_of_year": [120.0, 300.0]},
    "n_train": 50,
    "train_seed": 1,
}


def _check_keys(doc, allowed, where):
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: expected a JSON object")
    unknown = set(doc) - set(allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def _int_list(doc, key, minimum=1):
    v = doc[key]
    if not isinstance(v, list) or not v or not all(isinstance(i, int) and not isinstance(i, bool) for i in v):
        raise ConfigError(f"{key}: expected a non-empty list of integers")
    if min(v) < minimum:
        raise ConfigError(f"{key}: values must be >= {minimum}")
    if len(set(v)) != len(v):
        raise ConfigError(f"{key}: duplicate values")
    return list(v)


@dataclass
class ExperimentConfig:
    """Validated experiment settings; build with :func:`parse_config`."""

    data_source: dict
    methods: list = field(default_factory=lambda: ["gappy_pod", "sparse_raw"])
    k_list: list = field(default_factory=lambda: [2])
    p_list: list = field(default_factory=lambda: [10])
    placement: str = "random_points"
    placements: list = field(default_factory=lambda: list(LINE_PLACEMENTS))
    sensors: str | None = None
    conditions: list = field(default_factory=lambda: list(INTAKE_DEPTHS))
    trials: int = 20
    seed: int = 0
    noise: dict = field(default_factory=lambda: {"gaussian_sigma": 0.1})
    epsilon: dict = field(default_factory=lambda: {"policy": "noise"})
    rescale: bool = False
    solver: dict = field(default_factory=dict)
    band_edges: list = field(default_factory=lambda: list(DEFAULT_BAND_EDGES))
    output_dir: str = "results"
    base_dir: Path = field(default_factory=Path.cwd, repr=False)

    def to_json(self) -> dict:
        doc = {k: copy.deepcopy(getattr(self, k)) for k in sorted(_TOP_KEYS)}
        if doc["sensors"] is None:
            del doc["sensors"]
        return doc

    def digest(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    @property
    def is_synthetic(self) -> bool:
        return "synthetic" in self.data_source

    def resolve(self, path) -> Path:
        path = Path(path)
        return path if path.is_absolute() else self.base_dir / path

    def noise_model(self, seed: int) -> NoiseModel:
        return NoiseModel(
            float(self.noise.get("gaussian_sigma", 0.0)),
            float(self.noise.get("corruption_fraction", 0.0)),
            float(self.noise.get("corruption_scale", 0.0)),
            seed,
        )

    def solver_options(self) -> SolverOptions:
        return SolverOptions(**self.solver)

    def grid(self) -> FieldGrid:
        if self.is_synthetic:
            g = self.data_source["synthetic"]["grid"]
            return FieldGrid.triangular(g["nx"], g["nz"], g["dx_m"], g["dz_m"])
        return load_grid(self.resolve(self.data_source["files"]["grid"]))

    def base_params(self) -> StratificationParams:
        return StratificationParams(**self.data_source["synthetic"]["base"])


def _parse_source(doc):
    _check_keys(doc, {"synthetic", "files"}, "data_source")
    if len(doc) != 1:
        raise ConfigError("data_source: give exactly one of 'synthetic' or 'files'")
    if "synthetic" in doc:
        syn = doc["synthetic"]
        _check_keys(syn, _SYNTH_KEYS, "data_source.synthetic")
        out = copy.deepcopy(DEFAULT_SYNTHETIC)
        for key, value in syn.items():
            out[key] = copy.deepcopy(value)
        _check_keys(out["grid"], _GRID_KEYS, "data_source.synthetic.grid")
        if set(out["grid"]) != _GRID_KEYS:
            raise ConfigError(f"data_source.synthetic.grid: needs keys {sorted(_GRID_KEYS)}")
        try:
            StratificationParams(**out["base"])
        except TypeError as exc:
            raise ConfigError(f"data_source.synthetic.base: {exc}") from None
        except ValueError as exc:
            raise ConfigError(f"data_source.synthetic.base: {exc}") from None
        for key in ("spread", "test_spread"):
            if not isinstance(out[key], dict):
                raise ConfigError(f"data_source.synthetic.{key}: expected an object")
        if not isinstance(out["n_train"], int) or out["n_train"] < 1:
            raise ConfigError("data_source.synthetic.n_train: expected an integer >= 1")
        if not isinstance(out["train_seed"], int):
            raise ConfigError("data_source.synthetic.train_seed: expected an integer")
        return {"synthetic": out}
    files = doc["files"]
    _check_keys(files, _FILE_KEYS, "data_source.files")
    missing = _FILE_KEYS - set(files)
    if missing:
        raise ConfigError(f"data_source.files: missing keys {sorted(missing)}")
    rows = files["test_rows"]
    if not isinstance(rows, list) or not rows or not all(isinstance(i, int) and i >= 0 for i in rows):
        raise ConfigError("data_source.files.test_rows: expected a non-empty list of row indices")
    if len(set(rows)) != len(rows):
        raise ConfigError("data_source.files.test_rows: duplicate rows")
    return {"files": copy.deepcopy(files)}


def parse_config(doc: dict, base_dir=None) -> ExperimentConfig:
    """Validate a config document; relative file paths resolve against ``base_dir``."""
    _check_keys(doc, _TOP_KEYS, "config")
    kw = {}
    kw["data_source"] = _parse_source(doc.get("data_source", {"synthetic": {}}))
    if "methods" in doc:
        m = doc["methods"]
        if not isinstance(m, list) or not m or any(x not in METHODS for x in m):
            raise ConfigError(f"methods: expected a non-empty list from {METHODS}")
        if len(set(m)) != len(m):
            raise ConfigError("methods: duplicate entries")
        kw["methods"] = list(m)
    for key in ("k_list", "p_list"):
        if key in doc:
            kw[key] = _int_list(doc, key)
    if "placement" in doc:
        if doc["placement"] not in ("random_points", "explicit") + LINE_PLACEMENTS:
            raise ConfigError(f"placement: unknown value {doc['placement']!r}")
        kw["placement"] = doc["placement"]
    if "placements" in doc:
        pl = doc["placements"]
        if not isinstance(pl, list) or not pl or any(x not in LINE_PLACEMENTS for x in pl) or len(set(pl)) != len(pl):
            raise ConfigError(f"placements: expected distinct values from {LINE_PLACEMENTS}")
        kw["placements"] = list(pl)
    if "sensors" in doc:
        if not isinstance(doc["sensors"], str):
            raise ConfigError("sensors: expected a file path")
        kw["sensors"] = doc["sensors"]
    if kw.get("placement") == "explicit" and "sensors" not in kw:
        raise ConfigError("placement 'explicit' needs a 'sensors' file")
    if "conditions" in doc:
        c = doc["conditions"]
        if not isinstance(c, list) or not c or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in c):
            raise ConfigError("conditions: expected a non-empty list of intake depths (m)")
        kw["conditions"] = [float(v) for v in c]
    if "trials" in doc:
        if not isinstance(doc["trials"], int) or doc["trials"] < 1:
            raise ConfigError("trials: expected an integer >= 1")
        kw["trials"] = doc["trials"]
    if "seed" in doc:
        if not isinstance(doc["seed"], int) or doc["seed"] < 0:
            raise ConfigError("seed: expected a non-negative integer")
        kw["seed"] = doc["seed"]
    if "noise" in doc:
        _check_keys(doc["noise"], _NOISE_KEYS, "noise")
        try:
            NoiseModel(**{k: float(v) for k, v in doc["noise"].items()})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"noise: {exc}") from None
        kw["noise"] = dict(doc["noise"])
    if "epsilon" in doc:
        eps = doc["epsilon"]
        _check_keys(eps, {"policy", "value"}, "epsilon")
        if eps.get("policy") == "noise" and "value" not in eps:
            pass
        elif eps.get("policy") == "fixed" and isinstance(eps.get("value"), (int, float)) and eps["value"] >= 0:
            pass
        else:
            raise ConfigError("epsilon: expected {'policy': 'noise'} or {'policy': 'fixed', 'value': >= 0}")
        kw["epsilon"] = dict(eps)
    if "rescale" in doc:
        if not isinstance(doc["rescale"], bool):
            raise ConfigError("rescale: expected true or false")
        kw["rescale"] = doc["rescale"]
    if "solver" in doc:
        _check_keys(doc["solver"], set(SolverOptions.__dataclass_fields__), "solver")
        try:
            SolverOptions(**doc["solver"])
        except TypeError as exc:
            raise ConfigError(f"solver: {exc}") from None
        kw["solver"] = dict(doc["solver"])
    if "band_edges" in doc:
        e = doc["band_edges"]
        if not isinstance(e, list) or len(e) < 2 or any(b <= a for a, b in zip(e, e[1:])):
            raise ConfigError("band_edges: expected a strictly increasing list")
        kw["band_edges"] = [float(v) for v in e]
    if "output_dir" in doc:
        if not isinstance(doc["output_dir"], str):
            raise ConfigError("output_dir: expected a path")
        kw["output_dir"] = doc["output_dir"]
    cfg = ExperimentConfig(**kw, base_dir=Path(base_dir) if base_dir else Path.cwd())
    src = cfg.data_source
    if "files" in src and len(src["files"]["test_rows"]) != len(cfg.conditions):
        raise ConfigError("data_source.files.test_rows must list one row per condition")
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc})") from exc
    return parse_config(doc, path.parent)
