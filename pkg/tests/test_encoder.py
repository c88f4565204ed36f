"""Tests for the frame encoder, its heads and MCCK checkpoints."""
import json
import math
from dataclasses import replace

import numpy as np
import pytest
import torch
from torch.func import functional_call

from acoustics.config import FEATURE_DIM
from acoustics.models import FrameSequence
from encoder import (
    Checkpoint,
    FrameEncoder,
    ModelConfig,
    TaskSpec,
    count_parameters,
    encode_representations,
    get_preset,
    load_checkpoint,
    positional_encoding,
    save_checkpoint,
)
from encoder.checkpoint import decode_checkpoint, encode_checkpoint
from masking import CcmConfig, CfmConfig, apply_mask, build_mask_plan
from shared.errors import ConfigError, FormatError, InvalidInput, IoError, SequenceTooLong
from training.optim import huber_loss


def n_params(model):
    return sum(p.numel() for p in model.parameters())


def rewrite_metadata(blob, edit_header=None, edit_trailer=None):
    """Re-encode an MCCK blob after editing its header or trailer JSON in place."""
    header_len = int(np.frombuffer(blob[8:12], dtype='<u4')[0])
    header = json.loads(blob[12:12 + header_len])
    payload_end = 12 + header_len + 4 * sum(entry['count'] for entry in header['tensors'])
    trailer = json.loads(blob[payload_end + 4:])
    if edit_header:
        edit_header(header)
    if edit_trailer:
        edit_trailer(trailer)
    head = json.dumps(header, sort_keys=True).encode('utf-8')
    tail = json.dumps(trailer, sort_keys=True).encode('utf-8')
    return b''.join([
        blob[:8], np.array([len(head)], dtype='<u4').tobytes(), head,
        blob[12 + header_len:payload_end],
        np.array([len(tail)], dtype='<u4').tobytes(), tail,
    ])


class TestModelConfig:
    """Tests for ModelConfig, TaskSpec and presets."""

    def test_ffn_defaults_to_four_h(self):
        """Test ffn_dim=0 resolves to 4 * hidden_dim."""
        assert ModelConfig(hidden_dim=64, n_heads=4).ffn_dim == 256

    @pytest.mark.parametrize('kwargs', [
        {'hidden_dim': 30, 'n_heads': 4},
        {'hidden_dim': 33, 'n_heads': 3},
        {'n_layers': -1},
        {'dropout_rate': 1.0},
        {'init_std': 0.0},
    ])
    def test_rejects(self, kwargs):
        """Test invalid shapes and rates raise ConfigError."""
        with pytest.raises(ConfigError):
            ModelConfig(**kwargs)

    def test_presets(self):
        """Test the named presets."""
        base = get_preset('base')
        assert (base.n_layers, base.hidden_dim, base.n_heads, base.ffn_dim) == (4, 768, 12, 3072)
        large = get_preset('large')
        assert (large.n_layers, large.hidden_dim, large.n_heads) == (8, 1024, 16)
        assert get_preset('default') == base
        with pytest.raises(ConfigError):
            get_preset('huge')

    @pytest.mark.parametrize('text,expected', [
        ('classify_10', TaskSpec('classify', 10)),
        ('tag_56', TaskSpec('tag', 56)),
        ('tag', TaskSpec('tag', 56)),
    ])
    def test_task_parse(self, text, expected):
        """Test task strings parse to TaskSpec."""
        assert TaskSpec.parse(text) == expected
        assert TaskSpec.parse(str(expected)) == expected

    @pytest.mark.parametrize('text', ['regress_3', 'tag_x', 'classify_0'])
    def test_task_parse_rejects(self, text):
        """Test unknown kinds and counts are config errors."""
        with pytest.raises(ConfigError):
            TaskSpec.parse(text)


class TestPositionalEncoding:
    """Tests for the sinusoidal position table."""

    def test_against_formula(self):
        """Test every entry against the scalar formula."""
        pe = positional_encoding(50, 16)
        for pos in range(50):
            for i in range(8):
                angle = pos / 10000 ** (2 * i / 16)
                assert abs(pe[pos, 2 * i].item() - math.sin(angle)) < 1e-12
                assert abs(pe[pos, 2 * i + 1].item() - math.cos(angle)) < 1e-12

    def test_position_zero(self):
        """Test position 0 is sin 0 / cos 0 interleaved."""
        pe = positional_encoding(1, 768)
        assert not pe[0, 0::2].any()
        assert (pe[0, 1::2] == 1).all()

    def test_odd_hidden(self):
        """Test an odd hidden size is refused."""
        with pytest.raises(ConfigError):
            positional_encoding(4, 7)


class TestFrameEncoder:
    """Tests for the forward pass."""

    def test_shapes(self, small_cfg):
        """Test reconstruction, representations and task logits shapes."""
        model = FrameEncoder(small_cfg, TaskSpec('tag', 5)).eval()
        x = torch.randn(3, 17, FEATURE_DIM)
        assert model(x).shape == (3, 17, FEATURE_DIM)
        assert model.representations(x).shape == (3, 17, 32)
        assert model.classify(x).shape == (3, 5)

    def test_post_norm_outputs(self, small_cfg):
        """Test every block output is layer-normalized at initialization."""
        model = FrameEncoder(small_cfg).eval()
        acts = model.encode(torch.randn(2, 9, FEATURE_DIM))
        assert len(acts.hidden_states) == small_cfg.n_layers + 1
        for h in acts.hidden_states[1:]:
            assert torch.allclose(h.mean(dim=-1), torch.zeros(2, 9), atol=1e-5)
            assert torch.allclose(h.var(dim=-1, unbiased=False), torch.ones(2, 9), atol=1e-3)

    def test_padding_invariance(self, small_cfg):
        """Test real frames are unaffected by padding and its content."""
        model = FrameEncoder(small_cfg).eval()
        x = torch.randn(1, 10, FEATURE_DIM)
        alone = model(x)
        padded = torch.cat([x, 100 * torch.randn(1, 5, FEATURE_DIM)], dim=1)
        pad_mask = torch.zeros(1, 15, dtype=torch.bool)
        pad_mask[:, 10:] = True
        with torch.no_grad():
            out = model(padded, pad_mask)
        assert torch.allclose(out[:, :10], alone, atol=1e-5)

    def test_padding_gets_no_attention(self, small_cfg):
        """Test attention weights on padded keys are exactly zero."""
        model = FrameEncoder(small_cfg).eval()
        pad_mask = torch.tensor([[False] * 6 + [True] * 2])
        acts = model.encode(torch.randn(1, 8, FEATURE_DIM), pad_mask)
        for probs in acts.attention_weights:
            assert not probs[..., 6:].any()
            assert torch.allclose(probs.sum(dim=-1), torch.ones_like(probs[..., 0]))

    def test_permutation_equivariance(self, small_cfg):
        """Test without positions, permuting frames permutes the output."""
        model = FrameEncoder(replace(small_cfg, positional_encoding=False)).eval()
        x = torch.randn(1, 12, FEATURE_DIM)
        perm = torch.randperm(12)
        with torch.no_grad():
            assert torch.allclose(model(x[:, perm]), model(x)[:, perm], atol=1e-5)

    def test_positions_break_equivariance(self, small_cfg):
        """Test with positions the output depends on frame order."""
        model = FrameEncoder(small_cfg).eval()
        x = torch.randn(1, 12, FEATURE_DIM)
        perm = torch.arange(11, -1, -1)
        with torch.no_grad():
            assert not torch.allclose(model(x[:, perm]), model(x)[:, perm], atol=1e-5)

    def test_sequence_too_long(self, small_cfg):
        """Test more frames than max_positions is an input error."""
        model = FrameEncoder(small_cfg)
        with pytest.raises(SequenceTooLong):
            model(torch.randn(1, 257, FEATURE_DIM))

    def test_all_padding_pool(self, small_cfg):
        """Test pooling a fully padded sequence is rejected."""
        model = FrameEncoder(small_cfg)
        with pytest.raises(InvalidInput):
            model.pool(torch.randn(1, 4, 32), torch.ones(1, 4, dtype=torch.bool))

    def test_classify_without_head(self, small_cfg):
        """Test classify needs a task head."""
        with pytest.raises(InvalidInput):
            FrameEncoder(small_cfg).classify(torch.randn(1, 3, FEATURE_DIM))

    def test_encode_representations_restores_mode(self, small_cfg, make_sequences):
        """Test the numpy helper returns N x H and keeps training mode."""
        model = FrameEncoder(small_cfg).train()
        seq = make_sequences(count=1, n_frames=14)[0]
        reps = encode_representations(model, seq)
        assert reps.shape == (14, 32)
        assert isinstance(reps, np.ndarray)
        assert model.training


class TestGradients:
    """Finite-difference checks in float64 on a masked 8-frame sequence."""

    @pytest.fixture
    def setup(self, testing_cfg):
        rng = np.random.default_rng(12)
        model = FrameEncoder(testing_cfg).double()
        seq = FrameSequence(rng.standard_normal((8, FEATURE_DIM)).astype(np.float32), 'grad')
        plan = build_mask_plan(8, CfmConfig(), CcmConfig(), 'both', rng)
        masked, target_mask = apply_mask(seq, plan, rng)
        x = torch.from_numpy(masked.data.astype(np.float64))[None]
        target = torch.from_numpy(seq.data.astype(np.float64))[None]
        mask = torch.from_numpy(target_mask)[None]
        return model, x, target, mask

    def test_mask_selects_cells(self, setup):
        """Test the sampled plan masks two frames and leaves part of the sequence unselected."""
        _, _, _, mask = setup
        assert int(mask.all(dim=-1).sum()) >= 2
        assert not mask.all()

    def test_input_gradient(self, setup):
        """Test d(masked loss)/d(input) against central differences."""
        model, x, target, mask = setup
        assert torch.autograd.gradcheck(
            lambda inp: huber_loss(model(inp), target, mask),
            (x.clone().requires_grad_(),),
            eps=1e-6, atol=1e-7, rtol=1e-4,
        )

    def test_every_parameter_gradient(self, setup):
        """Test every parameter tensor against central differences within 1e-4 relative error."""
        model, x, target, mask = setup
        names = [name for name, _ in model.named_parameters()]
        assert 'blocks.0.attention.query.weight' in names

        def loss(*weights):
            return huber_loss(functional_call(model, dict(zip(names, weights)), (x,)), target, mask)

        weights = tuple(p.detach().clone().requires_grad_() for p in model.parameters())
        assert torch.autograd.gradcheck(loss, weights, eps=1e-6, atol=1e-7, rtol=1e-4)


class TestCountParameters:
    """Tests for the closed-form parameter count."""

    def test_zero_layers(self):
        """Test L=0, H=768 counts projection, reconstruction head only."""
        cfg = ModelConfig(n_layers=0, hidden_dim=768, n_heads=12)
        assert count_parameters(cfg) == 1_090_884
        assert count_parameters(cfg) == n_params(FrameEncoder(cfg))

    def test_base(self):
        """Test the base preset has about 29.3M parameters."""
        assert count_parameters(get_preset('base')) == 29_442_372
        assert abs(count_parameters(get_preset('base')) - 29.3e6) / 29.3e6 < 0.05

    @pytest.mark.parametrize('task', [None, TaskSpec('classify', 10), TaskSpec('tag', 56)])
    def test_matches_built_model(self, small_cfg, task):
        """Test the formula agrees with the module tree."""
        assert count_parameters(small_cfg, task) == n_params(FrameEncoder(small_cfg, task))


class TestCheckpoint:
    """Tests for MCCK save and load."""

    def test_bitwise_round_trip(self, tmp_path, small_cfg):
        """Test weights survive a file round trip bit for bit."""
        model = FrameEncoder(small_cfg, TaskSpec('classify', 3))
        path = save_checkpoint(tmp_path / 'm.mcck', model)
        ckpt = load_checkpoint(path)
        assert ckpt.model_config == small_cfg
        assert ckpt.task == TaskSpec('classify', 3)
        restored = ckpt.build_model()
        for name, tensor in model.state_dict().items():
            assert torch.equal(restored.state_dict()[name], tensor), name
        x = torch.randn(2, 7, FEATURE_DIM)
        assert torch.equal(restored.eval().classify(x), model.eval().classify(x))

    def test_layout(self, small_cfg):
        """Test magic, version and sorted JSON header lead the blob."""
        blob = encode_checkpoint(Checkpoint.from_model(FrameEncoder(small_cfg)))
        assert blob[:4] == b'MCCK'
        version, header_len = np.frombuffer(blob[4:12], dtype='<u4')
        assert version == 1
        header = json.loads(blob[12:12 + header_len])
        entry = header['tensors'][0]
        assert set(entry) == {'name', 'shape', 'dtype', 'offset', 'count'}
        assert entry['offset'] == 0 and entry['dtype'] == 'f32'

    def test_new_task_gets_fresh_head(self, small_cfg):
        """Test a different task keeps the encoder and drops the stored head."""
        model = FrameEncoder(small_cfg, TaskSpec('classify', 10))
        ckpt = decode_checkpoint(encode_checkpoint(Checkpoint.from_model(model)))
        tagged = ckpt.build_model(TaskSpec('tag', 5))
        assert tagged.task_head.classifier.out_features == 5
        assert torch.equal(tagged.input_projection.weight, model.input_projection.weight)

    def test_pretrained_checkpoint_for_task(self, small_cfg):
        """Test a head-less checkpoint builds a task model."""
        ckpt = Checkpoint.from_model(FrameEncoder(small_cfg))
        model = ckpt.build_model(TaskSpec('classify', 4), dropout_rate=0.2)
        assert model.cfg.dropout_rate == 0.2
        assert model.task_head is not None

    def test_missing_weights(self, small_cfg):
        """Test a checkpoint missing encoder tensors is a format error."""
        ckpt = Checkpoint.from_model(FrameEncoder(small_cfg))
        del ckpt.tensors['blocks.1.ffn.0.weight']
        with pytest.raises(FormatError):
            ckpt.build_model()

    def test_bad_magic(self):
        """Test foreign bytes are refused."""
        with pytest.raises(FormatError):
            decode_checkpoint(b'MCFE' + bytes(20))

    def test_bad_version(self, small_cfg):
        """Test unknown versions are refused."""
        blob = bytearray(encode_checkpoint(Checkpoint.from_model(FrameEncoder(small_cfg))))
        blob[4:8] = np.array([9], dtype='<u4').tobytes()
        with pytest.raises(FormatError):
            decode_checkpoint(bytes(blob))

    def test_bad_dtype(self, small_cfg):
        """Test non-f32 tensors are refused."""
        blob = encode_checkpoint(Checkpoint.from_model(FrameEncoder(small_cfg)))
        with pytest.raises(FormatError):
            decode_checkpoint(blob.replace(b'"f32"', b'"f16"', 1))

    def test_truncated(self, small_cfg):
        """Test a cut-off file is refused."""
        blob = encode_checkpoint(Checkpoint.from_model(FrameEncoder(small_cfg)))
        with pytest.raises(FormatError):
            decode_checkpoint(blob[:len(blob) // 2])

    def test_rewritten_metadata_still_decodes(self, small_cfg):
        """Test an unedited metadata rewrite reproduces the blob byte for byte."""
        blob = encode_checkpoint(Checkpoint.from_model(FrameEncoder(small_cfg)))
        assert rewrite_metadata(blob) == blob

    @pytest.mark.parametrize('edit_header', [
        lambda h: h.pop('tensors'),
        lambda h: h['tensors'][0].pop('name'),
        lambda h: h['tensors'][0].pop('count'),
        lambda h: h['tensors'][0].update(shape=[7, 7]),
        lambda h: h.update(tensors=[3]),
    ])
    def test_malformed_header(self, small_cfg, edit_header):
        """Test missing or mistyped header fields are format errors, not KeyError."""
        blob = encode_checkpoint(Checkpoint.from_model(FrameEncoder(small_cfg)))
        with pytest.raises(FormatError):
            decode_checkpoint(rewrite_metadata(blob, edit_header=edit_header))

    @pytest.mark.parametrize('edit_trailer', [
        lambda t: t.pop('model_config'),
        lambda t: t['model_config'].update(colour='red'),
        lambda t: t.update(task={'kind': 'classify', 'size': 3}),
    ])
    def test_malformed_trailer(self, small_cfg, edit_trailer):
        """Test a trailer without a usable model config or task is a format error."""
        blob = encode_checkpoint(Checkpoint.from_model(FrameEncoder(small_cfg)))
        with pytest.raises(FormatError):
            decode_checkpoint(rewrite_metadata(blob, edit_trailer=edit_trailer))

    def test_missing_file(self, tmp_path):
        """Test a missing path raises IoError."""
        with pytest.raises(IoError):
            load_checkpoint(tmp_path / 'absent.mcck')
