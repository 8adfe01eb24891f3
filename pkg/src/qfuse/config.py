"""Run configuration: flat sectioned key-value files, diff-able provenance.

Format: one ``section.key = value`` per line, ``#`` comments, lists
comma-separated. Defaults mirror the experiment hyperparameters (13
qubits, 7 layers, Adam at 0.01, batch 32, 100 epochs, C=10, 80/20 split,
100 unrestricted Gini trees); every seed is explicit so a persisted
config fully determines a run.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError
from .fusion import SCHEMES
from .noise import ChannelKind

DEFAULT_CHANNELS = tuple(kind.value for kind in ChannelKind)
DEFAULT_NOISE_PROBS = (0.05, 0.1, 0.2, 0.4, 0.6, 0.8)


@dataclass
class RunConfig:
    data_path: str = ""
    data_label_column: str = "label"
    data_positive_label: str = "1"
    data_categorical_columns: tuple[str, ...] = ()
    data_numeric_columns: tuple[str, ...] = ()
    data_subsample: int = 0  # 0 = use every row
    data_seed: int = 0
    prep_train_ratio: float = 0.8
    prep_pca_components: int = 0  # 0 = match qnn_n_qubits
    qnn_n_qubits: int = 13
    qnn_layers: int = 7
    qnn_learning_rate: float = 0.01
    qnn_batch_size: int = 32
    qnn_epochs: int = 100
    qnn_validation_fraction: float = 0.1
    qnn_seed: int = 0
    qsvm_c: float = 10.0
    qsvm_tol: float = 1e-3
    qsvm_calibration_folds: int = 3
    forest_n_trees: int = 100
    forest_max_depth: int = 0  # 0 = unrestricted
    forest_features_per_split: int = 0  # 0 = ceil(sqrt(d))
    forest_seed: int = 0
    fusion_schemes: tuple[str, ...] = ("hard", "margin", "probability")
    fusion_folds: int = 3
    fusion_seed: int = 0
    noise_channels: tuple[str, ...] = DEFAULT_CHANNELS
    noise_probabilities: tuple[float, ...] = DEFAULT_NOISE_PROBS
    noise_trajectories: int = 256
    noise_seed: int = 0
    run_out: str = "runs/default"
    run_workers: int = 1

    @property
    def pca_components(self) -> int:
        return self.prep_pca_components or self.qnn_n_qubits

    def validate(self) -> None:
        if self.pca_components != self.qnn_n_qubits:
            raise ConfigError(
                f"prep.pca_components={self.prep_pca_components} must match qnn.n_qubits={self.qnn_n_qubits}"
            )
        if not 0.0 < self.prep_train_ratio < 1.0:
            raise ConfigError(f"prep.train_ratio must be in (0,1), got {self.prep_train_ratio}")
        for scheme in self.fusion_schemes:
            if scheme not in SCHEMES:
                raise ConfigError(f"fusion.schemes entry {scheme!r} not one of {SCHEMES}")
        if not self.fusion_schemes:
            raise ConfigError("fusion.schemes must name at least one scheme")
        for channel in self.noise_channels:
            try:
                ChannelKind(channel)
            except ValueError:
                raise ConfigError(
                    f"noise.channels entry {channel!r} not one of {DEFAULT_CHANNELS}"
                ) from None
        for p in self.noise_probabilities:
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"noise.probabilities entry {p} outside [0,1]")
        if self.fusion_folds < 2 or self.qsvm_calibration_folds < 2:
            raise ConfigError("fold counts must be at least 2")
        for name, value in (
            ("qnn.n_qubits", self.qnn_n_qubits),
            ("qnn.layers", self.qnn_layers),
            ("qnn.batch_size", self.qnn_batch_size),
            ("qnn.epochs", self.qnn_epochs),
            ("forest.n_trees", self.forest_n_trees),
            ("noise.trajectories", self.noise_trajectories),
            ("run.workers", self.run_workers),
        ):
            if value < 1:
                raise ConfigError(f"{name} must be positive, got {value}")


_FIELD_TYPES = {f.name: f for f in fields(RunConfig)}


def _key_to_field(key: str) -> str:
    return key.replace(".", "_", 1)


def _field_to_key(name: str) -> str:
    return name.replace("_", ".", 1)


def _parse_value(name: str, raw: str):
    default = getattr(RunConfig(), name)
    raw = raw.strip()
    try:
        if isinstance(default, tuple):
            items = [item.strip() for item in raw.split(",") if item.strip()]
            if default and isinstance(default[0], float) or name == "noise_probabilities":
                return tuple(float(item) for item in items)
            return tuple(items)
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"cannot parse value {raw!r} for key {_field_to_key(name)}") from None


def parse_config(text: str) -> RunConfig:
    values = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        name = _key_to_field(key)
        if name not in _FIELD_TYPES:
            raise ConfigError(f"line {line_no}: unknown config key {key!r}")
        values[name] = _parse_value(name, raw)
    config = RunConfig(**values)
    config.validate()
    return config


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    return parse_config(path.read_text())


def format_config(config: RunConfig) -> str:
    lines = []
    for f in fields(RunConfig):
        value = getattr(config, f.name)
        if isinstance(value, tuple):
            rendered = ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)
        elif isinstance(value, float):
            rendered = repr(value)
        else:
            rendered = str(value)
        lines.append(f"{_field_to_key(f.name)} = {rendered}")
    return "\n".join(lines) + "\n"


def apply_overrides(config: RunConfig, seed: int | None = None, out: str | None = None) -> RunConfig:
    """CLI-level overrides: one seed fans out to every seeded stage."""
    if seed is not None:
        config.data_seed = seed
        config.qnn_seed = seed
        config.forest_seed = seed
        config.fusion_seed = seed
        config.noise_seed = seed
    if out is not None:
        config.run_out = out
    return config
