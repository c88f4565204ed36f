"""Tests for run configuration, manifests, the output lock, synth and the commands."""
import os
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

import cli
from acoustics.audio import write_wav
from acoustics.cache import cache_path, read_feature_cache
from acoustics.services.spectral import chromagram, stft_magnitude
from cli.config import CONFIG_ENV, RunConfig, load_run_config, parse_run_config
from cli.synth import class_noise_band, class_pitch_classes, synthesize_clip, synthesize_corpus
from encoder import load_checkpoint
from shared.errors import ConfigError, FormatError, InvalidInput, IoError
from shared.locking import OutputLock
from shared.manifest import Manifest, ManifestRow, parse_manifest, read_manifest, write_manifest

TINY_RUN = """\
# keep everything small
model.preset = testing
pretrain.batch_size = 2
pretrain.total_steps = 2
pretrain.checkpoint_every = 0
grid.batch_sizes = 4
grid.learning_rates = 0.001
grid.epochs = 1
grid.dropout_rates = 0.0
"""

MANIFEST = """\
#vocab: blues;jazz
clip_id\tpath\tsplit\tlabels\tduration_s
a\taudio/a.wav\ttrain\tblues\t30.0
b\taudio/b.wav\tvalid\tjazz\t29.5
c\t/abs/c.wav\tpretrain\t\t12.0
"""


@pytest.fixture(autouse=True)
def _no_dotenv(monkeypatch):
    monkeypatch.setattr(cli, 'load_dotenv', lambda *args, **kwargs: None)
    monkeypatch.delenv(CONFIG_ENV, raising=False)


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / 'tiny.conf'
    path.write_text(TINY_RUN)
    return str(path)


def synth_args(out, *extra):
    return ['--out', str(out), 'synth', '--min-seconds', '0.5', '--max-seconds', '0.5', *extra]


class TestRunConfig:
    """Tests for the key = value configuration file."""

    def test_defaults(self):
        """Test an empty file gives the defaults."""
        assert parse_run_config('') == RunConfig()

    def test_serialize_round_trip(self):
        """Test serialize() output parses back to the same config."""
        run = RunConfig.preset('tiny').with_overrides(seed=5, out_dir='somewhere')
        assert parse_run_config(run.serialize()) == run

    def test_values_and_comments(self):
        """Test scalars, tuples, booleans and comments."""
        run = parse_run_config(
            'seed = 9  # trailing comment\n'
            'grid.learning_rates = 1e-4, 2e-4\n'
            'finetune.freeze_encoder = true\n'
            'ccm.target_groups = mel:52:180\n'
            'cfm.budget_fraction = 0.2\n'
        )
        assert run.seed == 9
        assert run.grid.learning_rates == (1e-4, 2e-4)
        assert run.finetune.freeze_encoder is True
        assert run.ccm.target_groups == (('mel', 52, 180),)
        assert run.cfm.budget_fraction == 0.2

    def test_model_preset_refined(self):
        """Test model.preset is the base the other model keys refine."""
        run = parse_run_config('model.preset = tiny\nmodel.n_layers = 3\n')
        assert (run.model.n_layers, run.model.hidden_dim) == (3, 64)
        run = parse_run_config('model.preset = tiny\nmodel.hidden_dim = 128\n')
        assert run.model.ffn_dim == 512

    @pytest.mark.parametrize('text,fragment', [
        ('bogus.key = 1\n', 'unknown section'),
        ('model.depth = 1\n', 'unknown key'),
        ('seed = 1\nseed = 2\n', 'line 2: duplicate'),
        ('just words\n', 'line 1'),
        ('\n\nmodel.n_layers = many\n', 'line 3'),
        ('model.preset = enormous\n', 'enormous'),
        ('model.hidden_dim = 30\nmodel.n_heads = 4\n', 'divisible'),
    ])
    def test_errors(self, text, fragment):
        """Test malformed files raise ConfigError with the line or key."""
        with pytest.raises(ConfigError, match=fragment):
            parse_run_config(text)

    def test_environment_variable(self, tmp_path, monkeypatch):
        """Test $CADENZA_CONFIG is read when no path is given."""
        path = tmp_path / 'env.conf'
        path.write_text('seed = 42\n')
        monkeypatch.setenv(CONFIG_ENV, str(path))
        assert load_run_config().seed == 42
        assert load_run_config(None).seed == 42

    def test_example_config(self):
        """Test the shipped desk config parses onto the tiny model."""
        run = load_run_config(Path(__file__).parent.parent / 'configs' / 'desk.conf')
        assert run.model.hidden_dim == 64
        assert run.pretrain.crop_frames == 400

    def test_missing_file(self, tmp_path):
        """Test an unreadable config raises IoError."""
        with pytest.raises(IoError):
            load_run_config(tmp_path / 'nope.conf')

    def test_seed_override(self):
        """Test --seed reaches the run, pre-training and finetuning seeds."""
        run = RunConfig().with_overrides(seed=11, steps=7)
        assert (run.seed, run.pretrain.seed, run.finetune.seed) == (11, 11, 11)
        assert run.pretrain.total_steps == 7

    def test_cache_dir_default(self):
        """Test the feature cache defaults to <out>/features."""
        run = RunConfig().with_overrides(out_dir='runs/x')
        assert run.cache_dir() == os.path.join('runs/x', 'features')
        assert replace(run, paths=replace(run.paths, cache_dir='/c')).cache_dir() == '/c'


class TestManifest:
    """Tests for manifest parsing and queries."""

    def test_parse(self, tmp_path):
        """Test vocabulary, rows and path resolution."""
        manifest = parse_manifest(MANIFEST, root=tmp_path)
        assert manifest.vocab == ('blues', 'jazz')
        assert [row.clip_id for row in manifest.rows] == ['a', 'b', 'c']
        assert manifest.rows[2].labels == ()
        assert manifest.resolve(manifest.rows[0]) == tmp_path / 'audio' / 'a.wav'
        assert str(manifest.resolve(manifest.rows[2])) == '/abs/c.wav'

    def test_label_matrix_and_classes(self, tmp_path):
        """Test labels become a boolean matrix and class indices."""
        manifest = parse_manifest(MANIFEST, root=tmp_path)
        rows = manifest.split('train', 'valid')
        assert manifest.label_matrix(rows).tolist() == [[True, False], [False, True]]
        assert manifest.class_indices(rows).tolist() == [0, 1]
        with pytest.raises(ConfigError):
            manifest.class_indices(manifest.rows)

    def test_pretrain_excludes_downstream(self):
        """Test a pretrain clip that is also labeled downstream is dropped."""
        manifest = Manifest(vocab=('x',), rows=[
            ManifestRow('p1', 'p1.wav', 'pretrain'),
            ManifestRow('t1', 't1.wav', 'test', ('x',)),
        ])
        assert [r.clip_id for r in manifest.pretrain_rows()] == ['p1']
        assert manifest.downstream_ids() == {'t1'}

    def test_write_read(self, tmp_path):
        """Test a written manifest reads back identically."""
        manifest = parse_manifest(MANIFEST, root=tmp_path)
        write_manifest(tmp_path / 'm.tsv', manifest)
        assert read_manifest(tmp_path / 'm.tsv').rows == manifest.rows

    @pytest.mark.parametrize('text', [
        'clip_id\tpath\tsplit\tlabels\tduration_s\n',
        '#vocab: a\nclip\tpath\n',
        '#vocab: a\nclip_id\tpath\tsplit\tlabels\tduration_s\nx\tx.wav\ttrain\n',
        '#vocab: a\nclip_id\tpath\tsplit\tlabels\tduration_s\nx\tx.wav\ttrain\ta\tlong\n',
        '#vocab: a\nclip_id\tpath\tsplit\tlabels\tduration_s\nx\tx.wav\tholdout\ta\t1\n',
        '#vocab: a\nclip_id\tpath\tsplit\tlabels\tduration_s\nx\tx.wav\ttrain\tb\t1\n',
        '#vocab: a\nclip_id\tpath\tsplit\tlabels\tduration_s\nx\tx.wav\ttrain\ta\t1\nx\ty.wav\ttest\ta\t1\n',
    ])
    def test_malformed(self, text):
        """Test structural problems raise FormatError."""
        with pytest.raises(FormatError):
            parse_manifest(text)

    def test_missing_file(self, tmp_path):
        """Test a missing manifest raises IoError."""
        with pytest.raises(IoError):
            read_manifest(tmp_path / 'absent.tsv')


class TestOutputLock:
    """Tests for the advisory output lock."""

    def test_second_holder_refused(self, tmp_path):
        """Test a held directory names the holder pid."""
        with OutputLock(tmp_path):
            with pytest.raises(IoError, match=str(os.getpid())):
                OutputLock(tmp_path).acquire()
        assert not (tmp_path / '.cadenza.lock').exists()

    def test_reacquire_after_release(self, tmp_path):
        """Test the lock can be taken again once released."""
        OutputLock(tmp_path).acquire().release()
        with OutputLock(tmp_path) as lock:
            assert lock.path.exists()


class TestSynth:
    """Tests for the synthetic corpus generator."""

    def test_class_signatures(self):
        """Test triads a fifth apart and disjoint noise bands."""
        assert class_pitch_classes(0) == (0, 4, 7)
        assert class_pitch_classes(1) == (7, 11, 2)
        low0, high0 = class_noise_band(0, 3)
        low1, _ = class_noise_band(1, 3)
        assert low0 == pytest.approx(150.0) and high0 == pytest.approx(low1)

    def test_genre_corpus(self, tmp_path):
        """Test a balanced single-label corpus plus pretrain clips."""
        manifest = synthesize_corpus(tmp_path, n_classes=3, per_class=2, n_pretrain=2, seed=1,
                                     min_s=0.25, max_s=0.5)
        assert manifest.vocab == ('genre00', 'genre01', 'genre02')
        assert manifest.class_indices(manifest.split('train')).tolist() == [0, 0, 1, 1, 2, 2]
        assert [r.clip_id for r in manifest.split('pretrain')] == ['pre_00000', 'pre_00001']
        assert all(0.25 <= r.duration_s <= 0.5 for r in manifest.rows)
        assert read_manifest(tmp_path / 'manifest.tsv').rows == manifest.rows
        assert all(manifest.resolve(r).exists() for r in manifest.rows)

    def test_tags_corpus(self, tmp_path):
        """Test tag clips carry their own tag and use all three splits."""
        manifest = synthesize_corpus(tmp_path, n_classes=3, per_class=20, mode='tags', seed=0,
                                     min_s=0.1, max_s=0.1)
        assert {r.split for r in manifest.rows} == {'train', 'valid', 'test'}
        assert len(manifest.split('train')) == 3 * 14
        for row in manifest.rows:
            owner = int(row.clip_id[4:6])
            assert f'tag{owner:02d}' in row.labels
            assert 1 <= len(row.labels) <= 3

    def test_deterministic(self, tmp_path):
        """Test one seed reproduces the audio and manifest byte for byte."""
        synthesize_corpus(tmp_path / 'a', n_classes=2, per_class=2, seed=4, min_s=0.2, max_s=0.4)
        synthesize_corpus(tmp_path / 'b', n_classes=2, per_class=2, seed=4, min_s=0.2, max_s=0.4)
        names = sorted(p.name for p in (tmp_path / 'a' / 'audio').iterdir())
        for name in names:
            assert (tmp_path / 'a' / 'audio' / name).read_bytes() == (tmp_path / 'b' / 'audio' / name).read_bytes()
        assert (tmp_path / 'a' / 'manifest.tsv').read_text() == (tmp_path / 'b' / 'manifest.tsv').read_text()

    def test_classes_separable_by_chroma(self, feature_cfg):
        """Test class-0 and class-1 clips have different chroma argmax histograms."""
        def argmax_histogram(index):
            counts = np.zeros(12)
            for i in range(4):
                clip = synthesize_clip([index], 2.0, np.random.default_rng([5, index, i]), n_classes=3)
                chroma = chromagram(stft_magnitude(clip, feature_cfg), feature_cfg)
                counts += np.bincount(chroma.argmax(axis=1), minlength=12)
            return counts / counts.sum()

        first, second = argmax_histogram(0), argmax_histogram(1)
        assert first[list(class_pitch_classes(0))].sum() > 0.6
        assert second[list(class_pitch_classes(1))].sum() > 0.6
        assert 0.5 * np.abs(first - second).sum() > 0.3

    def test_rejects_bad_arguments(self, tmp_path):
        """Test unknown modes and degenerate sizes are input errors."""
        with pytest.raises(InvalidInput):
            synthesize_corpus(tmp_path, mode='speech')
        with pytest.raises(InvalidInput):
            synthesize_corpus(tmp_path, n_classes=1)


class TestCommands:
    """Tests driving main() end to end on tiny synthetic corpora."""

    def test_mask_demo(self, capsys):
        """Test the masking report prints budget and coverage."""
        assert cli.main(['mask-demo', '--n-frames', '200', '--plans', '200', '--seed', '3']) == 0
        out = capsys.readouterr().out
        assert 'cfm.budget_frames\t30\n' in out
        assert 'cfm.min_coverage_frames\t30\n' in out
        assert 'ccm.mel.group_size\t128\n' in out

    def test_missing_manifest_exit_code(self, tmp_path):
        """Test a CadenzaError becomes exit status 2."""
        assert cli.main(['--out', str(tmp_path), 'extract', '--manifest', str(tmp_path / 'none.tsv')]) == 2

    def test_malformed_checkpoint_exit_code(self, tmp_path):
        """Test a checkpoint whose header lacks its tensor list exits 2."""
        out = tmp_path / 'run'
        assert cli.main(synth_args(out, '--classes', '2', '--per-class', '1')) == 0
        metadata = b'{}'
        size = np.array([len(metadata)], dtype='<u4').tobytes()
        bad = out / 'bad.mcck'
        bad.write_bytes(b'MCCK' + np.array([1], dtype='<u4').tobytes() + size + metadata + size + metadata)
        assert cli.main(['--out', str(out), 'embed', '--manifest', str(out / 'manifest.tsv'),
                         '--checkpoint', str(bad)]) == 2

    def test_extract_is_idempotent(self, tmp_path):
        """Test a second extract skips up-to-date caches."""
        out = tmp_path / 'run'
        assert cli.main(synth_args(out, '--classes', '2', '--per-class', '2')) == 0
        manifest = str(out / 'manifest.tsv')
        assert cli.main(['--out', str(out), 'extract', '--manifest', manifest]) == 0

        caches = sorted((out / 'features').glob('*.mcfe'))
        assert len(caches) == 4
        seq = read_feature_cache(caches[0])
        assert seq.n_frames == 1 + 22050 // 1024
        stamps = [c.stat().st_mtime_ns for c in caches]

        assert cli.main(['--out', str(out), 'extract', '--manifest', manifest]) == 0
        assert [c.stat().st_mtime_ns for c in caches] == stamps

    def test_extract_reports_failures(self, tmp_path, make_sine):
        """Test a corrupt clip fails alone and sets exit status 1."""
        write_wav(tmp_path / 'good.wav', make_sine(440.0, seconds=0.3))
        (tmp_path / 'bad.wav').write_bytes(b'garbage')
        manifest = Manifest(vocab=('x',), rows=[
            ManifestRow('good', 'good.wav', 'train', ('x',)),
            ManifestRow('bad', 'bad.wav', 'train', ('x',)),
        ], root=tmp_path)
        write_manifest(tmp_path / 'm.tsv', manifest)
        out = tmp_path / 'out'
        assert cli.main(['--out', str(out), 'extract', '--manifest', str(tmp_path / 'm.tsv')]) == 1
        assert os.path.exists(cache_path(out / 'features', 'good'))
        assert not os.path.exists(cache_path(out / 'features', 'bad'))

    def test_locked_output_refused(self, tmp_path):
        """Test a command on a locked output directory exits 2."""
        with OutputLock(tmp_path):
            assert cli.main(synth_args(tmp_path)) == 2

    def test_task_vocabulary_mismatch(self, tmp_path):
        """Test the default 10-class task against a 2-label manifest is a config error."""
        out = tmp_path / 'run'
        assert cli.main(synth_args(out, '--classes', '2', '--per-class', '1')) == 0
        assert cli.main(['--out', str(out), 'finetune', '--manifest', str(out / 'manifest.tsv')]) == 2

    @pytest.mark.integration
    def test_pretrain_then_embed(self, tmp_path, tiny_config):
        """Test pre-training writes a checkpoint that embed can use."""
        out = tmp_path / 'run'
        assert cli.main(synth_args(out, '--classes', '2', '--per-class', '1', '--pretrain-clips', '3')) == 0
        manifest = str(out / 'manifest.tsv')
        assert cli.main(['--out', str(out), 'extract', '--manifest', manifest, '--workers', '2']) == 0
        assert cli.main(['--config', tiny_config, '--out', str(out), 'pretrain', '--manifest', manifest,
                         '--mask-log']) == 0
        ckpt = load_checkpoint(out / 'pretrained.mcck')
        assert ckpt.model_config.hidden_dim == 16
        assert ckpt.train_state['step'] == 2
        assert len((out / 'loss.tsv').read_text().splitlines()) == 2
        assert (out / 'masks.jsonl').exists()

        assert cli.main(['--config', tiny_config, '--out', str(out), 'embed', '--manifest', manifest,
                         '--checkpoint', str(out / 'pretrained.mcck'), '--splits', 'train']) == 0
        vectors = sorted((out / 'embeddings').glob('*.npy'))
        assert len(vectors) == 2
        assert np.load(vectors[0]).shape == (16,)

    @pytest.mark.integration
    def test_genre_cross_validation(self, tmp_path, tiny_config):
        """Test evaluate --task genre writes a k-fold report."""
        out = tmp_path / 'run'
        assert cli.main(synth_args(out, '--classes', '2', '--per-class', '4')) == 0
        manifest = str(out / 'manifest.tsv')
        assert cli.main(['--out', str(out), 'extract', '--manifest', manifest]) == 0
        assert cli.main(['--config', tiny_config, '--out', str(out), 'evaluate', '--manifest', manifest,
                         '--task', 'genre', '--folds', '2']) == 0
        lines = (out / 'cv_report.tsv').read_text().splitlines()
        assert lines[0].startswith('fold\t')
        assert len(lines) == 1 + 2 + 2
        assert lines[-2].startswith('mean_accuracy\t')

    @pytest.mark.integration
    def test_tags_finetune_and_evaluate(self, tmp_path, tiny_config):
        """Test finetune then evaluate on a tagging corpus."""
        out = tmp_path / 'run'
        assert cli.main(synth_args(out, '--mode', 'tags', '--classes', '3', '--per-class', '20',
                                   '--min-seconds', '0.2', '--max-seconds', '0.2')) == 0
        manifest = str(out / 'manifest.tsv')
        assert cli.main(['--out', str(out), 'extract', '--manifest', manifest]) == 0
        assert cli.main(['--config', tiny_config, '--out', str(out), 'finetune', '--manifest', manifest,
                         '--task', 'tags']) == 0
        grid_lines = (out / 'grid_report.tsv').read_text().splitlines()
        assert grid_lines[0].split('\t') == ['batch_size', 'learning_rate', 'epochs', 'dropout_rate', 'pr_auc_macro']
        assert load_checkpoint(out / 'finetuned.mcck').task.kind == 'tag'

        assert cli.main(['--config', tiny_config, '--out', str(out), 'evaluate', '--manifest', manifest,
                         '--task', 'tags', '--checkpoint', str(out / 'finetuned.mcck')]) == 0
        report = (out / 'tag_report.tsv').read_text()
        assert report.startswith('tag\tpositives\troc_auc\tpr_auc\n')
        assert 'roc_auc_macro\t' in report

