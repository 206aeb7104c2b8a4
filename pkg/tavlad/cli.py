import csv
from contextlib import contextmanager
from pathlib import Path

import click
import numpy as np

from . import __version__
from .ablation import run_ablation
from .attention import attention_map
from .checks import run_gradcheck_suite
from .codebook import build_codebook, load_codebook, save_codebook
from .config import (
    AblateConfig,
    CodebookConfig,
    EvalConfig,
    GradcheckConfig,
    SyntheticConfig,
    TrainConfig,
    load_config,
    print_config,
)
from .dataio import (
    SyntheticSpec,
    export_attention_pgm,
    gen_synthetic,
    load_attention_weights,
    load_dataset,
    load_signal_masks,
    read_attention_weights,
    read_features,
    read_manifest,
    uniform_sample,
)
from .dataio.binary import write_bytes
from .error import ConfigError, DataIOError, TavladError
from .helper import setup_logging
from .model import forward, init_params, load_checkpoint, save_checkpoint
from .numerics import Rng
from .trainer import evaluate, train_stage

LOG_LEVELS = ['DEBUG', 'INFO', 'WARNING', 'ERROR']
PUBLISHED = 'published setting'


@click.group()
def cli():
    """Temporal attention VLAD action recognition"""


def _run_command(name):
    """cli.command with the shared --seed and --log-level options"""
    def decorator(f):
        f = click.pass_context(f)
        f = click.option('--log-level', 'logger_level',
                         type=click.Choice(LOG_LEVELS),
                         help='Logging level [default: INFO]')(f)
        f = click.option('--seed', type=click.IntRange(min=0),
                         help='Root seed of every random stream '
                              '[default: 0]')(f)
        return cli.command(name)(f)
    return decorator


def _setup(ctx, config_class, section, options):
    """Resolve, echo and apply the config; options left at None are unset"""
    try:
        config = load_config(config_class, section, options)
    except ConfigError as ex:
        ctx.fail(str(ex))
    setup_logging(config)
    print_config(config, title=f'tavlad {ctx.info_name}')
    return config


@contextmanager
def _handle_errors(ctx):
    try:
        yield
    except ConfigError as ex:
        ctx.fail(str(ex))
    except TavladError as ex:
        raise click.ClickException(str(ex)) from None


@cli.command()
def version():
    """Show CLI version"""
    click.echo(__version__)


@_run_command('gen-synth')
@click.option('--out', type=click.Path(file_okay=False), required=True,
              help='Output directory of the dataset tree')
@click.option('--num-classes', type=int, help='Classes [default: 4]')
@click.option('--videos-per-class', type=int,
              help='Videos per class [default: 40]')
@click.option('--frames', type=int, help='Frames per video [default: 12]')
@click.option('--sample-frames', type=int,
              help='Frames sampled per video at load time [default: 8]')
@click.option('--grid-rows', type=int, help='Grid rows [default: 4]')
@click.option('--grid-cols', type=int, help='Grid columns [default: 4]')
@click.option('--channels', type=int, help='Feature channels P [default: 16]')
@click.option('--prototypes', type=int,
              help='Number of prototypes [default: 4]')
@click.option('--segments', type=int,
              help='Prototypes visited per video [default: 2]')
@click.option('--noise', type=float, help='Noise sigma [default: 0.1]')
@click.option('--signal-cells', type=int,
              help='Signal cells per frame [default: 1]')
@click.option('--reversed-pairs/--no-reversed-pairs', default=None,
              help='Pair classes as exact time reversals [default: on]')
@click.option('--clamp/--no-clamp', default=None,
              help='Clamp features at zero [default: off]')
@click.option('--attention-scale', type=float,
              help='Scale of the attention weight rows [default: 6.0]')
@click.option('--threads', type=click.IntRange(min=1),
              help='Worker threads [default: available cores]')
def gen_synth(ctx, out, **options):
    """Generate a synthetic dataset"""
    config = _setup(ctx, SyntheticConfig, 'synth', options)
    with _handle_errors(ctx):
        result = gen_synthetic(SyntheticSpec.from_config(config), out)
    for split, count in result.counts.items():
        click.echo(f'{split}: {count} videos -> {result.manifests[split]}')


@_run_command('codebook')
@click.option('--manifest', type=click.Path(dir_okay=False), required=True,
              help='Manifest of the videos to sample')
@click.option('--out', type=click.Path(dir_okay=False), required=True,
              help='Output codebook file (TAVC)')
@click.option('--k', type=int, help=f'Clusters [default: 64, {PUBLISHED}]')
@click.option('--samples', type=int,
              help='Sampled feature vectors [default: 100 * k]')
@click.option('--iters', type=int,
              help='Maximum Lloyd iterations [default: 100]')
@click.option('--alpha', type=float,
              help=f'Assignment sharpness [default: 1000, {PUBLISHED}]')
def codebook(ctx, manifest, out, **options):
    """Cluster sampled features into a VLAD codebook"""
    config = _setup(ctx, CodebookConfig, 'codebook', options)
    with _handle_errors(ctx):
        book, result = build_codebook(
            read_manifest(manifest), config.k, Rng(config.seed),
            n_samples=config.samples, max_iter=config.iters,
            alpha=config.alpha)
        save_codebook(book, out)
    for i, distortion in enumerate(result.trace):
        click.echo(f'iteration {i}: distortion {distortion:.6f}')
    click.echo(f'final distortion: {result.distortion:.6f}')


RESUME_FIXED = (
    ('aggregator', 'aggregator', '--aggregator'),
    ('hidden', 'hidden', '--hidden'),
    ('attention', 'attention_enabled', '--no-attention'),
)


def _check_resume(ctx, params, options):
    """Architecture flags given with --resume must match the checkpoint"""
    for option, attr, flag in RESUME_FIXED:
        value = options.get(option)
        if value is not None and value != getattr(params, attr):
            ctx.fail(f'{flag} conflicts with the checkpoint, which has '
                     f'{attr}={getattr(params, attr)}')


@_run_command('train')
@click.option('--manifest', type=click.Path(dir_okay=False), required=True,
              help='Training manifest')
@click.option('--val', type=click.Path(dir_okay=False), required=True,
              help='Validation manifest')
@click.option('--codebook', 'codebook_path', type=click.Path(dir_okay=False),
              help='Codebook file, starts a fresh model')
@click.option('--resume', type=click.Path(dir_okay=False),
              help='Checkpoint to continue from (required for stage 2)')
@click.option('--out', type=click.Path(file_okay=False), required=True,
              help='Output directory for checkpoints and history')
@click.option('--stage', type=click.IntRange(1, 2),
              help='Training stage [default: 1]')
@click.option('--aggregator', type=click.Choice(['gru', 'sum']),
              help='Temporal aggregator [default: gru]')
@click.option('--hidden', type=int,
              help=f'GRU hidden size [default: 256, {PUBLISHED}]')
@click.option('--epochs', type=int,
              help=f'Epochs [default: 50 in stage 1, 30 in stage 2, '
                   f'{PUBLISHED}]')
@click.option('--lr', 'base_lr', type=float,
              help=f'Base learning rate [default: 1e-2 in stage 1, 1e-4 in '
                   f'stage 2, {PUBLISHED}]')
@click.option('--batch', 'batch_size', type=int,
              help='Batch size [default: 32]')
@click.option('--dropout', 'dropout_rate', type=float,
              help=f'Descriptor dropout [default: 0.5, {PUBLISHED}]')
@click.option('--freeze-attention', is_flag=True, default=None,
              help='Keep attention weights fixed in stage 2')
@click.option('--no-attention', 'attention', flag_value=False, default=None,
              help='Disable attention (every cell weighs 1)')
def train(ctx, manifest, val, codebook_path, resume, out, **options):
    """Train one stage of the model"""
    config = _setup(ctx, TrainConfig, 'train', options)
    if config.stage == 2 and not resume:
        ctx.fail('--stage 2 requires --resume from a stage-1 checkpoint')
    if not resume and not codebook_path:
        ctx.fail('one of --codebook or --resume is required')
    with _handle_errors(ctx):
        train_manifest = read_manifest(manifest)
        train_set = load_dataset(train_manifest)
        val_set = load_dataset(read_manifest(val))
        if resume:
            params = load_checkpoint(resume)
            _check_resume(ctx, params, options)
        else:
            params = init_params(
                load_codebook(codebook_path),
                load_attention_weights(train_manifest),
                train_manifest.num_classes,
                Rng(config.seed).split('init'),
                hidden=config.hidden,
                aggregator=config.aggregator,
                attention_enabled=config.attention,
                dropout_rate=config.dropout_rate,
            )
        result = train_stage(train_set, val_set, params, config)
        out = Path(out)
        save_checkpoint(result.params, out / 'final.tavc')
        save_checkpoint(result.best_params, out / 'best.tavc')
        result.history.write_csv(out / 'history.csv')
    last = result.history[-1]
    click.echo(f'train accuracy: {last.train_acc:.6f}')
    click.echo(f'val accuracy: {last.val_acc:.6f}')


def _write_confusion(path, results):
    path = Path(path)
    num_classes = len(results[0][1].confusion)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open('w', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(['manifest', 'true'] + [
                f'pred_{c}' for c in range(num_classes)])
            for name, result in results:
                for c, row in enumerate(result.confusion):
                    writer.writerow([name, c] + [int(x) for x in row])
    except OSError as ex:
        raise DataIOError(f'cannot write {str(path)!r}: {ex.strerror}') \
            from ex


@_run_command('eval')
@click.option('--model', type=click.Path(dir_okay=False), required=True,
              help='Checkpoint to evaluate')
@click.option('--manifest', 'manifests', type=click.Path(dir_okay=False),
              required=True, multiple=True,
              help='Manifest of a split, may be repeated')
@click.option('--confusion', type=click.Path(dir_okay=False),
              help='CSV file for confusion counts')
@click.option('--batch', 'batch_size', type=int,
              help='Batch size [default: 32]')
def eval_(ctx, model, manifests, confusion, **options):
    """Report accuracy on one or more splits"""
    config = _setup(ctx, EvalConfig, 'eval', options)
    results = []
    with _handle_errors(ctx):
        params = load_checkpoint(model)
        for path in manifests:
            dataset = load_dataset(read_manifest(path))
            results.append((path, evaluate(dataset, params, config.batch_size)))
        if confusion:
            _write_confusion(confusion, results)
    for path, result in results:
        click.echo(f'{path}: accuracy {result.accuracy:.6f}')
    if len(results) > 1:
        mean = float(np.mean([r.accuracy for _, r in results]))
        click.echo(f'mean accuracy: {mean:.6f}')


@_run_command('encode')
@click.option('--model', type=click.Path(dir_okay=False), required=True,
              help='Checkpoint')
@click.option('--video', type=click.Path(dir_okay=False), required=True,
              help='Feature volume (TAVF)')
@click.option('--out', type=click.Path(dir_okay=False), required=True,
              help='Output file of little-endian f64 values')
@click.option('--sample-frames', type=click.IntRange(min=1),
              help='Uniformly sample this many frames [default: all]')
def encode(ctx, model, video, out, sample_frames, **options):
    """Write the video descriptor of one feature volume"""
    _setup(ctx, EvalConfig, 'eval', options)
    with _handle_errors(ctx):
        params = load_checkpoint(model)
        frames = read_features(video).data
        if sample_frames:
            frames = frames[uniform_sample(len(frames), sample_frames)]
        descriptor = forward(frames, params, 'eval').descriptor
        write_bytes(out, np.asarray(descriptor).astype('<f8').tobytes())
    click.echo(f'{descriptor.size} values -> {out}')


@_run_command('attention')
@click.option('--video', type=click.Path(dir_okay=False), required=True,
              help='Feature volume (TAVF)')
@click.option('--out', type=click.Path(file_okay=False), required=True,
              help='Output directory for frame_<t>.pgm')
@click.option('--model', type=click.Path(dir_okay=False),
              help='Take attention weights from this checkpoint')
@click.option('--weights', type=click.Path(dir_okay=False),
              help='Take attention weights from this TAVW file')
def attention(ctx, video, out, model, weights, **options):
    """Export per-frame attention maps as PGM images"""
    _setup(ctx, EvalConfig, 'eval', options)
    if bool(model) == bool(weights):
        ctx.fail('exactly one of --model or --weights is required')
    with _handle_errors(ctx):
        if model:
            aw = load_checkpoint(model).attention_weights
        else:
            aw = read_attention_weights(weights)
        volume = read_features(video)
        paths = export_attention_pgm(
            attention_map(volume, aw), volume.grid, out)
    click.echo(f'{len(paths)} images -> {out}')


@_run_command('gradcheck')
@click.option('--eps', type=float,
              help='Finite-difference step [default: 1e-5]')
@click.option('--tol', type=float,
              help='Relative error tolerance [default: 1e-4]')
def gradcheck(ctx, **options):
    """Finite-difference check of the full pipeline"""
    config = _setup(ctx, GradcheckConfig, 'gradcheck', options)
    with _handle_errors(ctx):
        result = run_gradcheck_suite(config.seed, config.eps, config.tol)
    click.echo(result.table())
    if not result.passed:
        raise click.ClickException('gradient check failed')
    click.echo('gradient check passed')


@_run_command('ablate')
@click.option('--manifest', type=click.Path(dir_okay=False), required=True,
              help='Training manifest')
@click.option('--val', type=click.Path(dir_okay=False), required=True,
              help='Validation manifest')
@click.option('--test', type=click.Path(dir_okay=False), required=True,
              help='Test manifest')
@click.option('--codebook', 'codebook_path', type=click.Path(dir_okay=False),
              required=True, help='Codebook file')
@click.option('--out', type=click.Path(dir_okay=False),
              help='CSV file for the result rows')
@click.option('--hidden', type=int,
              help='GRU hidden size of the attention rows [default: 256]')
@click.option('--hidden-size', 'hidden_sizes', type=int, multiple=True,
              help='GRU hidden size to sweep, may be repeated '
                   '[default: --hidden]')
@click.option('--stage1-epochs', type=int, help='[default: 50]')
@click.option('--stage2-epochs', type=int, help='[default: 30]')
@click.option('--stage1-lr', type=float, help='[default: 1e-2]')
@click.option('--stage2-lr', type=float, help='[default: 1e-4]')
@click.option('--batch', 'batch_size', type=int,
              help='Batch size [default: 32]')
@click.option('--dropout', 'dropout_rate', type=float,
              help='Descriptor dropout [default: 0.5]')
def ablate(ctx, manifest, val, test, codebook_path, out, **options):
    """Run the aggregator and attention ablation ladder"""
    options['hidden_sizes'] = list(options['hidden_sizes']) or None
    config = _setup(ctx, AblateConfig, 'ablate', options)
    with _handle_errors(ctx):
        manifests = {'train': read_manifest(manifest),
                     'val': read_manifest(val),
                     'test': read_manifest(test)}
        datasets = {k: load_dataset(m) for k, m in manifests.items()}
        masks = None
        if manifests['test'].masks is not None:
            masks = load_signal_masks(manifests['test'])
        result = run_ablation(
            datasets, load_codebook(codebook_path),
            load_attention_weights(manifests['train']), config, masks=masks)
        if out:
            result.write_csv(out)
    click.echo(result.table())


if __name__ == '__main__':
    cli()
