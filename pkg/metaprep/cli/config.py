"""Experiment configuration files.

The format is TOML restricted to flat dotted keys, one ``section.field =
value`` per line, e.g. ``model.d_model = 32``. Serialization writes every
field so a stored config never depends on defaults.
"""
import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import toml

from metaprep.errors import ConfigError
from metaprep.finetune import DownstreamKind, FinetuneConfig
from metaprep.metatrain import MetaConfig
from metaprep.model import ModelConfig
from metaprep.tasks import SamplerConfig, TaskTag, parse_mix

REQUIRED = ('meta.k', 'meta.alpha', 'meta.beta', 'meta.total_meta_test_steps')
DEFAULT_MIX = {'MLM': 0.5, 'NSP': 0.5}


@dataclass(frozen=True)
class DownstreamConfig:
    """Synthetic downstream tasks and fine-tuning seeds"""

    kinds: Tuple[str, ...] = ('SINGLE_SENTENCE_CLS', 'PAIR_CLS')
    sizes: Tuple[int, ...] = (64, 64, 64)
    seeds: Tuple[int, ...] = (0, 1, 2)
    task_seed: int = 0
    label_noise: float = 0.0
    batch_size: int = 8

    def __post_init__(self):
        object.__setattr__(self, 'kinds', tuple(self.kinds))
        object.__setattr__(self, 'sizes', tuple(self.sizes))
        object.__setattr__(self, 'seeds', tuple(self.seeds))
        for kind in self.kinds:
            try:
                DownstreamKind(kind)
            except ValueError:
                raise ConfigError('downstream.kinds',
                                  f"unknown task kind {kind!r}") from None
        if not self.seeds:
            raise ConfigError('downstream.seeds', "need at least one seed")


@dataclass(frozen=True)
class StudyConfig:
    """Depth sweep and warm-start comparison of `metaprep experiment`"""

    depths: Tuple[int, ...] = (0, 1, 3, 5, 10, 20)
    warm_k: int = 5
    base_steps: int = 200

    def __post_init__(self):
        object.__setattr__(self, 'depths', tuple(self.depths))
        if any(k < 0 for k in self.depths):
            raise ConfigError('experiment.depths', "depths must be >= 0")


@dataclass(frozen=True)
class ExperimentConfig:
    meta: MetaConfig
    model: ModelConfig = ModelConfig()
    data: SamplerConfig = SamplerConfig()
    task_mix: Dict[str, float] = field(
        default_factory=lambda: dict(DEFAULT_MIX))
    finetune: FinetuneConfig = FinetuneConfig()
    downstream: DownstreamConfig = DownstreamConfig()
    experiment: StudyConfig = StudyConfig()
    run_id: str = 'run'
    seed: int = 0
    out: str = 'runs'
    dropout: bool = False

    def __post_init__(self):
        if self.data.max_len > self.model.max_len:
            raise ConfigError('data.max_len',
                              f"{self.data.max_len} exceeds model.max_len "
                              f"{self.model.max_len}")

    def with_overrides(self, out: Optional[str] = None,
                       seed: Optional[int] = None):
        changes = {}
        if out is not None:
            changes['out'] = str(out)
        if seed is not None:
            changes['seed'] = int(seed)
            changes['meta'] = dataclasses.replace(self.meta, seed=int(seed))
        return dataclasses.replace(self, **changes)


# section name -> (ExperimentConfig attribute, dataclass)
SECTIONS = {
    'model': ('model', ModelConfig),
    'meta': ('meta', MetaConfig),
    'data': ('data', SamplerConfig),
    'finetune': ('finetune', FinetuneConfig),
    'downstream': ('downstream', DownstreamConfig),
    'experiment': ('experiment', StudyConfig),
}
RUN_FIELDS = ('run_id', 'seed', 'out', 'dropout')
# derived from run.seed, never written
HIDDEN = {('meta', 'seed')}


def _flatten(tree: Dict[str, Any], prefix: str = '') -> Dict[str, Any]:
    flat = {}
    for key, value in tree.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, name + '.'))
        else:
            flat[name] = value
    return flat


def _line_of(text: str, key: str) -> Optional[int]:
    for number, line in enumerate(text.splitlines(), 1):
        if line.split('=', 1)[0].strip() == key:
            return number
    return None


def _coerce(value: Any, default: Any, key: str, line: Optional[int]):
    try:
        if isinstance(default, Enum):
            return type(default)(str(value).upper())
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise TypeError("expected true or false")
            return value
        if isinstance(default, tuple):
            return tuple(value)
        if isinstance(default, int):
            if isinstance(value, bool) or int(value) != value:
                raise TypeError("expected an integer")
            return int(value)
        if isinstance(default, float):
            return float(value)
        return type(default)(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(key, f"invalid value {value!r}: {e}", line) \
            from None


def _defaults(cls) -> Dict[str, Any]:
    out = {}
    for f in dataclasses.fields(cls):
        if f.default is not dataclasses.MISSING:
            out[f.name] = f.default
    return out


# MetaConfig required fields have no default; these give their types
META_TYPES = {'k': 0, 'alpha': 0.0, 'beta': 0.0,
              'total_meta_test_steps': 0}


def parse_config(text: str) -> ExperimentConfig:
    """parse configuration text

    Raises:
        ConfigError: TOML syntax error, unknown or missing key, or a value
            rejected by validation; carries the line number when known

    Returns:
        ExperimentConfig: validated configuration
    """
    try:
        tree = toml.loads(text)
    except toml.TomlDecodeError as e:
        raise ConfigError('syntax', e.msg, e.lineno) from None
    flat = _flatten(tree)

    for key in REQUIRED:
        if key not in flat:
            raise ConfigError(key, "missing required field")

    sections: Dict[str, Dict[str, Any]] = {name: {} for name in SECTIONS}
    mix: Dict[str, float] = {}
    run: Dict[str, Any] = {}
    run_defaults = {'run_id': 'run', 'seed': 0, 'out': 'runs',
                    'dropout': False}
    for key, value in flat.items():
        line = _line_of(text, key)
        section, _, name = key.partition('.')
        if section == 'tasks' and name:
            mix[name] = _coerce(value, 0.0, key, line)
        elif section == 'run' and name in RUN_FIELDS:
            run[name] = _coerce(value, run_defaults[name], key, line)
        elif section in SECTIONS and (section, name) not in HIDDEN:
            cls = SECTIONS[section][1]
            defaults = dict(META_TYPES) if cls is MetaConfig else {}
            defaults.update(_defaults(cls))
            if name not in defaults:
                raise ConfigError(key, "unknown key", line)
            sections[section][name] = _coerce(value, defaults[name], key,
                                              line)
        else:
            raise ConfigError(key, "unknown key", line)

    seed = run.get('seed', 0)
    sections['meta']['seed'] = seed
    built = {}
    for section, (attr, cls) in SECTIONS.items():
        try:
            built[attr] = cls(**sections[section])
        except ConfigError as e:
            raise ConfigError(e.field, str(e).split(': ', 1)[-1],
                              _line_of(text, e.field)) from None
    if mix:
        try:
            parse_mix(mix)
        except ConfigError as e:
            raise ConfigError(e.field, str(e).split(': ', 1)[-1],
                              _line_of(text, f"tasks.{next(iter(mix))}")) \
                from None
        mix = {TaskTag.parse(k).value: v for k, v in mix.items()}
    else:
        mix = dict(DEFAULT_MIX)
    try:
        return ExperimentConfig(task_mix=mix, **built, **run)
    except ConfigError as e:
        raise ConfigError(e.field, str(e).split(': ', 1)[-1],
                          _line_of(text, e.field)) from None


def _value(value: Any) -> str:
    if isinstance(value, Enum):
        value = value.value
    if isinstance(value, tuple):
        value = list(value)
    return toml.TomlEncoder().dump_value(value)


def serialize_config(config: ExperimentConfig) -> str:
    """every field as one flat dotted-key line"""
    lines: List[str] = []
    for name in RUN_FIELDS:
        lines.append(f"run.{name} = {_value(getattr(config, name))}")
    for section, (attr, cls) in SECTIONS.items():
        lines.append('')
        obj = getattr(config, attr)
        for f in dataclasses.fields(cls):
            if (section, f.name) in HIDDEN:
                continue
            lines.append(f"{section}.{f.name} = "
                         f"{_value(getattr(obj, f.name))}")
    lines.append('')
    for tag, weight in config.task_mix.items():
        lines.append(f"tasks.{tag} = {_value(float(weight))}")
    return '\n'.join(lines) + '\n'


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError('config', f"{path} does not exist")
    return parse_config(path.read_text())


def write_config(config: ExperimentConfig, path: Union[str, Path]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialize_config(config))
