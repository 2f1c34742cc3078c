import math

import pytest
import torch

from imot.config import RunConfig, validate_config
from imot.decoder import Decoder, coordinate_embedding, particle_grid
from imot.encoder import Encoder

CFG = validate_config(RunConfig(token_len=16, k1=5, k2=3, particle_count=9,
                                encoder_layers=1, decoder_layers=2, mlp_hidden=8))


def test_coordinate_embedding_hand_oracle():
    # token_len=8: 4 dims per coordinate with frequencies 1 and 10000^-0.5,
    # ordered sin/cos per frequency, x dims before y dims.
    v = torch.tensor([[0.7, -1.3]], dtype=torch.float64)
    emb = coordinate_embedding(v, 8)
    w1 = 10000.0 ** (-0.5)
    want = torch.tensor([[
        math.sin(0.7), math.cos(0.7), math.sin(0.7 * w1), math.cos(0.7 * w1),
        math.sin(-1.3), math.cos(-1.3), math.sin(-1.3 * w1), math.cos(-1.3 * w1),
    ]], dtype=torch.float64)
    assert torch.allclose(emb, want, atol=1e-12)


def test_coordinate_embedding_shapes_and_odd_error():
    v = torch.randn(2, 5, 2, dtype=torch.float64)
    assert coordinate_embedding(v, 12).shape == (2, 5, 12)
    with pytest.raises(ValueError, match="even"):
        coordinate_embedding(v, 7)


def test_particle_grid_is_a_grid_over_the_square():
    grid = particle_grid(9)
    vals = {-1.5, 0.0, 1.5}
    assert grid.shape == (9, 2)
    assert set(grid[:, 0].tolist()) == vals and set(grid[:, 1].tolist()) == vals
    assert len({tuple(r) for r in grid.tolist()}) == 9

    grid = particle_grid(128)
    assert grid.shape == (128, 2)
    assert torch.all(grid.abs() <= 1.5)
    assert torch.equal(grid, particle_grid(128))   # deterministic


def _encoder_output(batch=2):
    torch.manual_seed(0)
    enc = Encoder(CFG)
    x = torch.randn(batch, 6, CFG.token_len, dtype=torch.float64)
    return enc(x)


def test_decoder_shapes_and_refinement():
    torch.manual_seed(1)
    dec = Decoder(CFG)
    out = _encoder_output()
    velocities, content, _ = dec(out)
    assert velocities.shape == (2, 9, 2)
    assert content.shape == (2, 9, CFG.token_len)
    # refinement must move the particles away from the shared grid
    start = dec.initial_velocities.unsqueeze(0).expand(2, -1, -1)
    assert not torch.allclose(velocities, start)


def test_decoder_shares_heads_across_layers():
    dec = Decoder(CFG)
    # shared perceptrons live on the decoder, not on layers
    for layer in dec.layers:
        assert not hasattr(layer, "refine")
        assert not hasattr(layer, "embed")
    names = [n for n, _ in dec.named_parameters()]
    assert sum(n.startswith("refine.") for n in names) == 4   # two Linear layers
    assert sum(n.startswith("embed.") for n in names) == 4


def test_gradient_reaches_initial_velocities_and_encoder():
    torch.manual_seed(2)
    enc = Encoder(CFG)
    dec = Decoder(CFG)
    x = torch.randn(1, 6, CFG.token_len, dtype=torch.float64)
    velocities, _, _ = dec(enc(x))
    velocities.sum().backward()
    assert dec.initial_velocities.grad is not None
    assert float(dec.initial_velocities.grad.abs().sum()) > 0
    some_enc_param = next(enc.parameters())
    assert some_enc_param.grad is not None


def test_cross_attention_maps_cover_both_modalities():
    torch.manual_seed(3)
    dec = Decoder(CFG)
    out = _encoder_output(batch=1)
    _, _, maps = dec(out, need_weights=True)
    assert len(maps) == CFG.decoder_layers
    w_accel, w_gyro = maps[0]
    assert w_accel.shape == (1, CFG.attention_heads, 9, 9)   # P x 3D tokens
    assert w_gyro.shape == (1, CFG.attention_heads, 9, 9)
    ones = torch.ones(1, CFG.attention_heads, 9, dtype=torch.float64)
    assert torch.allclose(w_accel.sum(-1), ones, atol=1e-9)
