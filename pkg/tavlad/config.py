import os
import sys

import toml
from terminaltables import SingleTable
from validr import T, Invalid, asdict, fields, modelclass

from .dataio.synthetic import SyntheticSpec
from .error import ConfigError

CONFIG_ENV = 'TAVLAD_CONFIG'


class RunConfig:
    seed = T.int.min(0).default(0)
    logger_level = T.enum('DEBUG INFO WARNING ERROR').default('INFO')
    logger_format = T.str.default(
        '%(asctime)s [%(process)s] %(levelname)-5s '
        '%(name)s:%(lineno)-4d %(message)s')
    logger_datefmt = T.str.default('%Y-%m-%d %H:%M:%S')


@modelclass
class SyntheticConfig(RunConfig):
    num_classes = T.int.min(1).default(4)
    videos_per_class = T.int.min(1).default(40)
    frames = T.int.min(1).default(12)
    sample_frames = T.int.min(1).default(8)
    grid_rows = T.int.min(1).default(4)
    grid_cols = T.int.min(1).default(4)
    channels = T.int.min(1).default(16)
    prototypes = T.int.min(1).default(4)
    segments = T.int.min(1).default(2)
    noise = T.float.min(0).default(0.1)
    signal_cells = T.int.min(1).default(1)
    reversed_pairs = T.bool.default(True)
    clamp = T.bool.default(False)
    attention_scale = T.float.exmin(0).default(6.0)
    val_fraction = T.float.min(0).exmax(1).default(0.2)
    test_fraction = T.float.min(0).exmax(1).default(0.2)
    threads = T.int.min(1).optional

    def __post_init__(self):
        if self.threads is None:
            self.threads = os.cpu_count() or 1
        SyntheticSpec.from_config(self)


@modelclass
class CodebookConfig(RunConfig):
    k = T.int.min(1).default(64)
    samples = T.int.min(1).optional
    iters = T.int.min(1).default(100)
    alpha = T.float.exmin(0).default(1000.0)

    def __post_init__(self):
        if self.samples is None:
            self.samples = 100 * self.k


class _TrainOptions:
    batch_size = T.int.min(1).default(32)
    decay_factor = T.float.exmin(0).max(1).default(0.5)
    decay_every = T.int.min(1).default(5)
    dropout_rate = T.float.min(0).exmax(1).default(0.5)
    adam_beta1 = T.float.min(0).exmax(1).default(0.9)
    adam_beta2 = T.float.min(0).exmax(1).default(0.999)
    adam_eps = T.float.exmin(0).default(1e-8)
    hidden = T.int.min(1).default(256)


TRAIN_OPTION_KEYS = tuple(
    k for k in vars(_TrainOptions) if not k.startswith('_'))


STAGE_DEFAULTS = {
    1: dict(epochs=50, base_lr=1e-2),
    2: dict(epochs=30, base_lr=1e-4),
}


@modelclass
class TrainConfig(_TrainOptions, RunConfig):
    stage = T.int.min(1).max(2).default(1)
    epochs = T.int.min(1).optional
    base_lr = T.float.min(0).optional
    freeze_attention = T.bool.default(False)
    aggregator = T.enum('gru sum').default('gru')
    attention = T.bool.default(True)

    def __post_init__(self):
        defaults = STAGE_DEFAULTS[self.stage]
        if self.epochs is None:
            self.epochs = defaults['epochs']
        if self.base_lr is None:
            self.base_lr = defaults['base_lr']


@modelclass
class AblateConfig(_TrainOptions, RunConfig):
    hidden_sizes = T.list(T.int.min(1)).optional
    stage1_epochs = T.int.min(1).default(STAGE_DEFAULTS[1]['epochs'])
    stage2_epochs = T.int.min(1).default(STAGE_DEFAULTS[2]['epochs'])
    stage1_lr = T.float.min(0).default(STAGE_DEFAULTS[1]['base_lr'])
    stage2_lr = T.float.min(0).default(STAGE_DEFAULTS[2]['base_lr'])

    def __post_init__(self):
        if not self.hidden_sizes:
            self.hidden_sizes = [self.hidden]

    def train_config(self, stage, freeze_attention=False):
        shared = asdict(self, keys=TRAIN_OPTION_KEYS)
        return TrainConfig(
            stage=stage,
            epochs=getattr(self, f'stage{stage}_epochs'),
            base_lr=getattr(self, f'stage{stage}_lr'),
            freeze_attention=freeze_attention,
            seed=self.seed,
            **shared,
        )


@modelclass
class EvalConfig(RunConfig):
    batch_size = T.int.min(1).default(32)


@modelclass
class GradcheckConfig(RunConfig):
    eps = T.float.min(1e-7).max(1e-3).default(1e-5)
    tol = T.float.exmin(0).default(1e-4)


def _read_table(config_path, section):
    print(f'* Load config file {config_path!r}', file=sys.stderr)
    try:
        with open(config_path) as f:
            content = f.read()
    except FileNotFoundError:
        msg = f'config file {config_path!r} not found'
        raise ConfigError(msg) from None
    try:
        config = toml.loads(content)
    except toml.TomlDecodeError:
        msg = f'config file {config_path!r} is not valid TOML file'
        raise ConfigError(msg) from None
    table = config.get(section, {})
    if not isinstance(table, dict):
        raise ConfigError(f'[{section}] in {config_path!r} is not a table')
    return table


def load_config(config_class, section, cli_config=None):
    """
    defaults < [section] of the $TAVLAD_CONFIG file < command-line flags

    Flags left at None are treated as not given.
    """
    cli_config = {k: v for k, v in (cli_config or {}).items() if v is not None}
    config_path = os.getenv(CONFIG_ENV, None)
    if config_path:
        config = _read_table(config_path, section)
        unknown = sorted(set(config) - set(fields(config_class)))
        if unknown:
            raise ConfigError(
                f'unknown key(s) in [{section}] of {config_path!r}: '
                f'{", ".join(unknown)}')
        config.update(cli_config)
    else:
        config = cli_config
    try:
        return config_class(**config)
    except Invalid as ex:
        raise ConfigError(ex.message) from None


def _shorten(x, w=30):
    return (x[:w] + '...') if len(x) > w else x


def print_config(config, title='Configs', file=None):
    table = [('Key', 'Value', 'Schema')]
    config_schema = config.__schema__.items
    for key, value in sorted(asdict(config).items()):
        schema = config_schema[key]
        table.append(
            (key, _shorten(str(value)), _shorten(schema.repr()))
        )
    table = SingleTable(table, title=title)
    print(table.table, file=file or sys.stderr)
