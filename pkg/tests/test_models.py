import struct

import numpy as np
import pytest

from nemakit.engine import Tensor, no_grad, ops
from nemakit.models import (
    CheckpointError,
    DENSENET121_PARAMS_IMAGENET,
    build_classifier,
    build_conv_block,
    build_dense_block,
    build_densenet121,
    build_inception_block,
    build_model,
    build_nemanet,
    build_transition,
    load_weights,
    save_weights,
)
from nemakit.models.graph import LayerGraph, ParamCensus
from nemakit.models.layers import Conv2d


def n_params(module):
    return sum(p.size for _, p in module.named_parameters())


def small_nemanet(num_classes=5, seed=0):
    return build_nemanet(num_classes, 64, width_divisor=16, block_layers=(1, 1, 1, 1), seed=seed)


def test_conv_block_channels_and_closed_form():
    rng = np.random.default_rng(0)
    spec = build_conv_block(64, 32)
    assert spec.out_channels == 32 and 64 + spec.out_channels == 96
    c, g = 64, 32
    # two BNs (gamma, beta, mean, var), 1x1 conv to 4g, 3x3 conv to g
    assert n_params(spec.build(rng)) == 4 * c + c * 4 * g + 4 * (4 * g) + 4 * g * g * 9
    tiny = build_conv_block(3, 1).build(rng)
    assert tiny(Tensor(np.ones((1, 3, 4, 4)))).shape == (1, 1, 4, 4)


def test_dense_block_channel_arithmetic():
    assert build_dense_block(64, 32, 6).out_channels == 256
    one = build_dense_block(64, 32, 1).build(np.random.default_rng(0))
    assert n_params(one) == n_params(build_conv_block(64, 32).build(np.random.default_rng(0)))
    channels, stages = 64, []
    for i, layers in enumerate((6, 12, 24, 16)):
        channels = build_dense_block(channels, 32, layers).out_channels
        stages.append(channels)
        if i < 3:
            channels = build_transition(channels, 0.5).out_channels
    assert stages == [256, 512, 1024, 1024]


def test_transition():
    spec = build_transition(256, 0.5)
    assert spec.out_channels == 128 and spec.output_shape((256, 8, 8)) == (128, 4, 4)
    assert build_transition(256, 1.0).out_channels == 256
    assert n_params(spec.build(np.random.default_rng(0))) == 4 * 256 + 256 * 128


@pytest.mark.parametrize("kind", ["A", "B", "C", "reduction"])
def test_inception_same_padding_and_width_sum(kind):
    rng = np.random.default_rng(1)
    spec = build_inception_block(kind, 8, {k: 2 for k in build_inception_block(kind, 8).widths})
    module = spec.build(rng)
    out = module(Tensor(rng.standard_normal((1, 8, 35, 35))))
    if kind == "reduction":
        assert out.shape == (1, spec.out_channels, 18, 18)
        assert spec.out_channels == 2 + 2 + 8
    else:
        assert out.shape == (1, spec.out_channels, 35, 35)
        assert spec.out_channels == {"A": 8, "B": 8, "C": 12}[kind]


def test_asymmetric_pair_is_cheaper_than_square():
    rng = np.random.default_rng(0)
    c = 16
    pair = n_params(Conv2d(c, c, (1, 7), rng)) + n_params(Conv2d(c, c, (7, 1), rng))
    square = n_params(Conv2d(c, c, 7, rng))
    assert pair == 2 * 7 * c * c < square == 49 * c * c
    # same receptive field: an impulse spreads over a 7x7 footprint either way
    x = np.zeros((1, 1, 15, 15))
    x[0, 0, 7, 7] = 1
    w17, w71 = Tensor(np.ones((1, 1, 1, 7))), Tensor(np.ones((1, 1, 7, 1)))
    y = ops.conv2d(ops.conv2d(Tensor(x), w17, padding=(0, 3)), w71, padding=(3, 0))
    z = ops.conv2d(Tensor(x), Tensor(np.ones((1, 1, 7, 7))), padding=3)
    np.testing.assert_array_equal(y.data != 0, z.data != 0)


def test_unknown_inception_kind():
    with pytest.raises(ValueError, match="unknown inception kind"):
        build_inception_block("D", 8)


def test_densenet121_imagenet_census_exact():
    census = build_densenet121(1000, 224).census()
    assert census.total == DENSENET121_PARAMS_IMAGENET == 8_062_504


def test_densenet121_head_swap_arithmetic():
    assert build_densenet121(5, 224).census().total == 8_062_504 - 1025 * 1000 + 1025 * 5


def test_census_identity_and_input_size_independence():
    for name in ("nemanet", "densenet121"):
        big, small = build_model(name, 5, 224).census(), build_model(name, 5, 64).census()
        assert big.total == big.trainable + big.non_trainable
        assert (big.total, big.trainable, big.non_trainable) == (small.total, small.trainable, small.non_trainable)


def test_nemanet_forward_contract():
    model = build_nemanet(5, 224)
    model.eval()
    with no_grad():
        logits = model(Tensor(np.zeros((1, 3, 224, 224))))
    assert logits.shape == (1, 5)
    assert ops.softmax(logits.data.astype(np.float64)).sum() == pytest.approx(1.0, abs=1e-12)


def test_parameter_names_unique_and_running_stats_untrainable():
    model = small_nemanet()
    names = [n for n, _ in model.named_parameters()]
    assert len(names) == len(set(names))
    for name, p in model.named_parameters():
        assert p.trainable == (not name.endswith(("running_mean", "running_var")))
    model.train()
    x = Tensor(np.random.default_rng(0).uniform(0, 1, (2, 3, 64, 64)))
    ops.softmax_cross_entropy(model(x), [0, 1]).backward()
    for name, p in model.named_parameters():
        assert (p.grad is not None) == p.trainable, name


def test_shape_inference_and_validation():
    model = small_nemanet()
    shapes = model.infer_shapes()
    assert shapes[model.output_node] == (5, 1, 1)
    assert shapes["fusion"][1:] == shapes["final_norm"][1:]
    with pytest.raises(ValueError):
        build_nemanet(5, 48)


def test_graph_rejects_bad_edges():
    graph = LayerGraph("g", 3, 32)
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        graph.add("head", build_classifier(3, 2), ["missing"], rng)


def test_checkpoint_roundtrip_bitwise(tmp_path):
    model = small_nemanet(seed=1)
    x = Tensor(np.random.default_rng(2).uniform(0, 1, (2, 3, 64, 64)))
    model.eval()
    with no_grad():
        before = model(x).data.copy()
    path = tmp_path / "m.nema"
    save_weights(model, path)
    other = small_nemanet(seed=99)
    load_weights(other, path)
    other.eval()
    with no_grad():
        np.testing.assert_array_equal(other(x).data, before)


def test_partial_load_backbone_name_diff(tmp_path):
    dense = build_densenet121(3, 64, width_divisor=16, block_layers=(1, 1, 1, 1))
    path = tmp_path / "d.nema"
    save_weights(dense, path)
    nemanet = small_nemanet()
    before = {n: p.data.copy() for n, p in nemanet.named_parameters()}
    kept = load_weights(nemanet, path, partial=True)
    dense_names = {n for n, _ in dense.named_parameters()}
    expected_kept = {n for n in before if n not in dense_names}
    assert set(kept) == expected_kept
    assert {n.split(".")[0] for n in kept} == {
        "reduce1", "inception_a", "reduce2", "inception_b", "reduce3", "inception_c", "fusion_classifier"}
    dense_params = dict(dense.named_parameters())
    for name, p in nemanet.named_parameters():
        if name in expected_kept:
            np.testing.assert_array_equal(p.data, before[name])
        else:
            np.testing.assert_array_equal(p.data, dense_params[name].data)
    with pytest.raises(CheckpointError, match="missing"):
        load_weights(small_nemanet(), path)


def test_flipped_dimension_names_parameter(tmp_path):
    model = build_conv_block(3, 2).build(np.random.default_rng(0))
    path = tmp_path / "c.nema"
    save_weights(model, path)
    blob = bytearray(path.read_bytes())
    name = b"conv1.weight"
    at = blob.index(name) + len(name) + 4  # skip ndim
    # (8, 3, 1, 1) stored as (3, 8, 1, 1): same byte count, swapped extents
    blob[at:at + 8] = struct.pack("<II", 3, 8)
    path.write_bytes(bytes(blob))
    with pytest.raises(CheckpointError, match="conv1.weight"):
        load_weights(model, path)


def test_corrupt_header(tmp_path):
    path = tmp_path / "bad.nema"
    path.write_bytes(b"JUNKJUNK")
    with pytest.raises(CheckpointError, match="magic"):
        load_weights(small_nemanet(), path)
    good = tmp_path / "good.nema"
    save_weights(small_nemanet(), good)
    good.write_bytes(good.read_bytes()[:-3])
    with pytest.raises(CheckpointError):
        load_weights(small_nemanet(), good)


def test_param_census_counts_owners():
    census = ParamCensus.of(list(build_conv_block(4, 2).build(np.random.default_rng(0)).named_parameters()))
    assert {row.name for row in census.per_layer} == {"norm1", "conv1", "norm2", "conv2"}
    assert census.non_trainable == 2 * 4 + 2 * 8
