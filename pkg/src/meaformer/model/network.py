"""The measurement network.

Backbone features are flattened into a token sequence, refined by the
encoder, then (a) reshaped back and pushed through the convolutional
prediction head for segmentation + endpoint heatmaps, and (b) attended by
learnable queries whose states feed a shared coordinate-regression FFN after
every decoder layer.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ContractViolation
from ..numcore import (BatchNorm2d, Conv2d, ConvTranspose2d, Linear, Module,
                       parameter, relu, sigmoid)
from ..numcore import tensor as T
from .backbone import LiteBackbone
from .config import ModelConfig
from .transformer import Decoder, Encoder, sine_position_encoding

HEAD_CHANNELS = 32  # fixed width of the prediction head


@dataclass
class HeadOutput:
    """5 (or 3) planes at input resolution: sigmoid segmentation S + raw heatmaps M."""

    raw: T.Tensor         # (N, 1+n_queries, H0, W0) pre-activation
    seg: T.Tensor         # (N, 1, H0, W0), sigmoid applied
    heatmaps: T.Tensor    # (N, n_queries, H0, W0), linear output


class PredictionHead(Module):
    def __init__(self, c_in, c_out, rng, dtype):
        super().__init__()
        self.conv1 = Conv2d(c_in, HEAD_CHANNELS, 3, stride=1, rng=rng, dtype=dtype)
        self.bn1 = BatchNorm2d(HEAD_CHANNELS, dtype=dtype)
        self.deconv1 = ConvTranspose2d(HEAD_CHANNELS, HEAD_CHANNELS, 4, stride=2, pad=1, rng=rng, dtype=dtype)
        self.bn2 = BatchNorm2d(HEAD_CHANNELS, dtype=dtype)
        self.conv2 = Conv2d(HEAD_CHANNELS, HEAD_CHANNELS, 3, stride=1, rng=rng, dtype=dtype)
        self.bn3 = BatchNorm2d(HEAD_CHANNELS, dtype=dtype)
        self.deconv2 = ConvTranspose2d(HEAD_CHANNELS, HEAD_CHANNELS, 4, stride=2, pad=1, rng=rng, dtype=dtype)
        self.bn4 = BatchNorm2d(HEAD_CHANNELS, dtype=dtype)
        self.out = Conv2d(HEAD_CHANNELS, c_out, 1, stride=1, pad=0, rng=rng, dtype=dtype)

    def forward(self, f):
        x = self.bn1(self.conv1(f))
        x = self.bn2(self.deconv1(x))
        x = self.bn3(self.conv2(x))
        x = self.bn4(self.deconv2(x))
        return self.out(x)


class RegressionFFN(Module):
    """Two ReLU layers + linear projection to (x, y), squashed to (0,1)."""

    def __init__(self, c, hidden, rng, dtype):
        super().__init__()
        self.fc1 = Linear(c, hidden, rng=rng, dtype=dtype)
        self.fc2 = Linear(hidden, hidden, rng=rng, dtype=dtype)
        self.proj = Linear(hidden, 2, rng=rng, dtype=dtype, zero_init=True)

    def forward(self, q):
        return sigmoid(self.proj(relu(self.fc2(relu(self.fc1(q))))))


class MeasurementNet(Module):
    def __init__(self, cfg: ModelConfig, dtype=np.float32):
        super().__init__()
        self.cfg = cfg
        self.dtype = dtype
        rng = np.random.default_rng(cfg.seed)
        self.rng = np.random.default_rng(cfg.seed + 1)  # dropout stream
        c = cfg.channels
        self.backbone = LiteBackbone(c, rng, dtype)
        self.encoder = Encoder(cfg.n_encoder_layers, c, cfg.n_heads,
                               cfg.ffn_dim, cfg.dropout, rng, dtype)
        self.decoder = Decoder(cfg.n_decoder_layers, c, cfg.n_heads,
                               cfg.ffn_dim, cfg.dropout, rng, dtype)
        self.query_embed = parameter(rng.standard_normal((cfg.n_queries, c)).astype(dtype))
        self.head = PredictionHead(c, cfg.head_out_channels, rng, dtype)
        self.reg_ffn = RegressionFFN(c, cfg.reg_hidden, rng, dtype)
        self._pos_cache = {}
        self._bind_dropout()

    def _bind_dropout(self):
        from ..numcore.layers import Dropout
        for m in self.modules():
            if isinstance(m, Dropout):
                m.rng = self.rng

    def reseed(self, seed):
        """Reset the dropout stream (training determinism)."""
        self.rng = np.random.default_rng(seed)
        self._bind_dropout()

    def _positions(self, h, w):
        key = (h, w)
        if key not in self._pos_cache:
            self._pos_cache[key] = T.Tensor(
                sine_position_encoding(h, w, self.cfg.channels, self.dtype))
        return self._pos_cache[key]

    # -- pipeline pieces (exposed separately for tests) ---------------------

    def extract_features(self, x):
        n, c, h, w = x.shape
        if c != 3:
            raise ContractViolation(f"expected 3 input channels, got {c}")
        if h != self.cfg.input_size or w != self.cfg.input_size:
            raise ContractViolation(
                f"expected {self.cfg.input_size}px input, got {h}x{w}")
        return self.backbone(x)

    def encode(self, feat):
        """(N,C,h,w) feature map -> (N, h*w, C) encoded sequence."""
        n, c, h, w = feat.shape
        seq = T.transpose(T.reshape(feat, (n, c, h * w)), (0, 2, 1))
        pos = self._positions(h, w)
        return self.encoder(seq, pos), pos

    def decode(self, memory, pos):
        if memory.shape[1] == 0:
            raise ContractViolation("decoder needs a non-empty encoder memory")
        qpos = self.query_embed
        return self.decoder(memory, pos, qpos)

    def run_head(self, memory, h, w):
        n = memory.shape[0]
        fmap = T.reshape(T.transpose(memory, (0, 2, 1)), (n, self.cfg.channels, h, w))
        out = self.head(fmap)
        seg = sigmoid(out[:, 0:1])
        heat = out[:, 1:]
        return HeadOutput(raw=out, seg=seg, heatmaps=heat)

    def regress(self, states):
        """Apply the shared FFN to every decoder layer's query state."""
        return [self.reg_ffn(s) for s in states]

    def forward(self, x):
        """x: (3,H,W) or (N,3,H,W) -> (HeadOutput, [per-layer (N,n_queries,2)])."""
        x = T.as_tensor(x, dtype=self.dtype)
        if x.ndim == 3:
            x = T.reshape(x, (1,) + x.shape)
        feat = self.extract_features(x)
        h, w = feat.shape[2], feat.shape[3]
        memory, pos = self.encode(feat)
        head_out = self.run_head(memory, h, w)
        states = self.decode(memory, pos)
        keypoints = self.regress(states)
        return head_out, keypoints
