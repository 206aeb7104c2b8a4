import pytest
from click.testing import CliRunner

from tavlad.cli import cli
from tavlad.config import CONFIG_ENV

SYNTH_ARGS = [
    '--num-classes', '2', '--videos-per-class', '5', '--frames', '4',
    '--sample-frames', '3', '--grid-rows', '2', '--grid-cols', '2',
    '--channels', '4', '--prototypes', '2', '--segments', '2',
    '--threads', '2',
]


@pytest.fixture(autouse=True)
def no_config_file(monkeypatch):
    monkeypatch.delenv(CONFIG_ENV, raising=False)


def invoke(*args):
    return CliRunner().invoke(cli, [str(a) for a in args])


@pytest.fixture(scope='module')
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp('cli')
    data = root / 'data'
    result = invoke('gen-synth', '--out', data, *SYNTH_ARGS)
    assert result.exit_code == 0, result.output
    result = invoke('codebook', '--manifest', data / 'train.toml',
                    '--out', root / 'codebook.tavc', '--k', 2,
                    '--samples', 20, '--iters', 5)
    assert result.exit_code == 0, result.output
    result = invoke('train', '--manifest', data / 'train.toml',
                    '--val', data / 'val.toml',
                    '--codebook', root / 'codebook.tavc',
                    '--out', root / 'stage1', '--hidden', 4,
                    '--epochs', 2, '--batch', 4)
    assert result.exit_code == 0, result.output
    return root


def test_version():
    result = invoke('version')
    assert result.exit_code == 0
    assert result.output.strip()


def test_gen_synth_is_deterministic(tmp_path):
    for name in ('a', 'b'):
        result = invoke('gen-synth', '--out', tmp_path / name, *SYNTH_ARGS)
        assert result.exit_code == 0, result.output
        assert 'train: 6 videos' in result.output
    files = sorted(p.relative_to(tmp_path / 'a')
                   for p in (tmp_path / 'a').rglob('*') if p.is_file())
    for rel in files:
        assert (tmp_path / 'a' / rel).read_bytes() == \
            (tmp_path / 'b' / rel).read_bytes()


def test_gen_synth_infeasible(tmp_path):
    result = invoke('gen-synth', '--out', tmp_path, *SYNTH_ARGS,
                    '--signal-cells', 99)
    assert result.exit_code == 2
    assert 'signal cells' in result.output


def test_codebook_output(workspace):
    assert (workspace / 'codebook.tavc').is_file()
    result = invoke('codebook', '--manifest', workspace / 'data/train.toml',
                    '--out', workspace / 'again.tavc', '--k', 2,
                    '--samples', 20, '--iters', 5)
    assert result.exit_code == 0
    assert 'final distortion:' in result.output
    assert (workspace / 'again.tavc').read_bytes() == \
        (workspace / 'codebook.tavc').read_bytes()


def test_train_outputs(workspace):
    stage1 = workspace / 'stage1'
    for name in ('final.tavc', 'best.tavc', 'history.csv'):
        assert (stage1 / name).is_file()
    lines = (stage1 / 'history.csv').read_text().splitlines()
    assert lines[0] == 'epoch,lr,train_loss,train_acc,val_acc'
    assert len(lines) == 3


def test_stage_two_needs_resume(workspace):
    data = workspace / 'data'
    result = invoke('train', '--manifest', data / 'train.toml',
                    '--val', data / 'val.toml',
                    '--codebook', workspace / 'codebook.tavc',
                    '--out', workspace / 'bad', '--stage', 2)
    assert result.exit_code == 2
    assert '--resume' in result.output


def test_stage_two_resume(workspace):
    data = workspace / 'data'
    result = invoke('train', '--manifest', data / 'train.toml',
                    '--val', data / 'val.toml',
                    '--resume', workspace / 'stage1/best.tavc',
                    '--out', workspace / 'stage2', '--stage', 2,
                    '--epochs', 1, '--batch', 4, '--freeze-attention')
    assert result.exit_code == 0, result.output
    assert (workspace / 'stage2/final.tavc').is_file()


@pytest.mark.parametrize('flags, name', [
    (('--hidden', 8), '--hidden'),
    (('--aggregator', 'sum'), '--aggregator'),
    (('--no-attention',), '--no-attention'),
])
def test_resume_rejects_other_architecture(workspace, tmp_path, flags, name):
    data = workspace / 'data'
    result = invoke('train', '--manifest', data / 'train.toml',
                    '--val', data / 'val.toml',
                    '--resume', workspace / 'stage1/best.tavc',
                    '--out', tmp_path / 'out', '--stage', 2,
                    '--epochs', 1, '--batch', 4, *flags)
    assert result.exit_code == 2
    assert f'{name} conflicts with the checkpoint' in result.output
    assert not (tmp_path / 'out').exists()


def test_eval_several_manifests(workspace, tmp_path):
    data = workspace / 'data'
    confusion = tmp_path / 'confusion.csv'
    result = invoke('eval', '--model', workspace / 'stage1/final.tavc',
                    '--manifest', data / 'train.toml',
                    '--manifest', data / 'val.toml',
                    '--confusion', confusion)
    assert result.exit_code == 0, result.output
    assert 'train.toml: accuracy' in result.output
    assert 'mean accuracy:' in result.output
    rows = confusion.read_text().splitlines()
    assert rows[0] == 'manifest,true,pred_0,pred_1'
    assert len(rows) == 1 + 2 * 2


def test_eval_missing_model(workspace, tmp_path):
    result = invoke('eval', '--model', tmp_path / 'nope.tavc',
                    '--manifest', workspace / 'data/val.toml')
    assert result.exit_code == 1
    assert 'nope.tavc' in result.output


def test_encode_descriptor(workspace, tmp_path):
    out = tmp_path / 'desc.bin'
    result = invoke('encode', '--model', workspace / 'stage1/final.tavc',
                    '--video', workspace / 'data/videos/c00_v000.tavf',
                    '--out', out, '--sample-frames', 3)
    assert result.exit_code == 0, result.output
    assert len(out.read_bytes()) == 2 * 4 * 8


def test_attention_images(workspace, tmp_path):
    video = workspace / 'data/videos/c01_v002.tavf'
    result = invoke('attention', '--video', video, '--out', tmp_path / 'm',
                    '--model', workspace / 'stage1/final.tavc')
    assert result.exit_code == 0, result.output
    assert len(list((tmp_path / 'm').glob('frame_*.pgm'))) == 4
    result = invoke('attention', '--video', video, '--out', tmp_path / 'w',
                    '--weights', workspace / 'data/attention.tavw')
    assert result.exit_code == 0, result.output
    result = invoke('attention', '--video', video, '--out', tmp_path / 'x')
    assert result.exit_code == 2


def test_gradcheck_command():
    result = invoke('gradcheck')
    assert result.exit_code == 0, result.output
    assert 'gradient check passed' in result.output


def test_config_file_unknown_key(tmp_path, monkeypatch):
    path = tmp_path / 'tavlad.toml'
    path.write_text('[gradcheck]\nepsilon = 1e-5\n')
    monkeypatch.setenv(CONFIG_ENV, str(path))
    result = invoke('gradcheck')
    assert result.exit_code == 2
    assert 'epsilon' in result.output


def test_ablate_command(workspace, tmp_path):
    data = workspace / 'data'
    out = tmp_path / 'ablation.csv'
    result = invoke('ablate', '--manifest', data / 'train.toml',
                    '--val', data / 'val.toml', '--test', data / 'test.toml',
                    '--codebook', workspace / 'codebook.tavc', '--out', out,
                    '--hidden', 4, '--stage1-epochs', 1, '--stage2-epochs', 1,
                    '--batch', 4)
    assert result.exit_code == 0, result.output
    assert 'attention H=4 frozen' in result.output
    assert len(out.read_text().splitlines()) == 5
