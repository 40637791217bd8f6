"""Transformer encoder/decoder with fixed 2D sine positional encodings.

Post-norm layers (norm after the residual add), ReLU feed-forward blocks.
Positional encodings are added to the attention query/key inputs of every
layer, never to the values; the decoder queries use their learnable
embedding the same way.
"""

import math

import numpy as np

from ..numcore import (Dropout, LayerNorm, Linear, Module, ModuleList,
                       MultiHeadAttention, relu)
from ..numcore import tensor as T


def sine_position_encoding(h, w, channels, dtype=np.float32):
    """(h*w, channels) fixed encoding; half the channels encode y, half x.

    Rows/cols are mapped to (0, 2pi) at half-pixel centers so every grid
    position gets a distinct vector.
    """
    half = channels // 2
    n_pairs = half // 2
    if n_pairs == 0:
        raise ValueError("channels too small for sine encoding")
    ys = (np.arange(h, dtype=np.float64) + 0.5) / h * (2 * math.pi)
    xs = (np.arange(w, dtype=np.float64) + 0.5) / w * (2 * math.pi)
    freqs = 10000.0 ** (-np.arange(n_pairs, dtype=np.float64) / n_pairs)

    def encode(vals):
        ang = vals[:, None] * freqs[None, :]
        out = np.empty((vals.size, 2 * n_pairs))
        out[:, 0::2] = np.sin(ang)
        out[:, 1::2] = np.cos(ang)
        return out

    ey = encode(ys)            # (h, half)
    ex = encode(xs)            # (w, half)
    pos = np.empty((h, w, channels))
    pos[:, :, :half] = ey[:, None, :]
    pos[:, :, half:] = ex[None, :, :]
    return pos.reshape(h * w, channels).astype(dtype)


class FeedForward(Module):
    def __init__(self, c, hidden, dropout_p, rng, dtype):
        super().__init__()
        self.fc1 = Linear(c, hidden, rng=rng, dtype=dtype)
        self.fc2 = Linear(hidden, c, rng=rng, dtype=dtype)
        self.drop = Dropout(dropout_p, rng)

    def forward(self, x):
        return self.fc2(self.drop(relu(self.fc1(x))))


class EncoderLayer(Module):
    def __init__(self, c, n_heads, ffn_hidden, dropout_p, rng, dtype):
        super().__init__()
        self.attn = MultiHeadAttention(c, n_heads, dropout_p, rng, dtype)
        self.ffn = FeedForward(c, ffn_hidden, dropout_p, rng, dtype)
        self.norm1 = LayerNorm(c, dtype=dtype)
        self.norm2 = LayerNorm(c, dtype=dtype)
        self.drop1 = Dropout(dropout_p, rng)
        self.drop2 = Dropout(dropout_p, rng)

    def forward(self, x, pos):
        qk = x + pos
        x = self.norm1(x + self.drop1(self.attn(qk, qk, x)))
        x = self.norm2(x + self.drop2(self.ffn(x)))
        return x


class DecoderLayer(Module):
    def __init__(self, c, n_heads, ffn_hidden, dropout_p, rng, dtype):
        super().__init__()
        self.self_attn = MultiHeadAttention(c, n_heads, dropout_p, rng, dtype)
        self.cross_attn = MultiHeadAttention(c, n_heads, dropout_p, rng, dtype)
        self.ffn = FeedForward(c, ffn_hidden, dropout_p, rng, dtype)
        self.norm1 = LayerNorm(c, dtype=dtype)
        self.norm2 = LayerNorm(c, dtype=dtype)
        self.norm3 = LayerNorm(c, dtype=dtype)
        self.drop1 = Dropout(dropout_p, rng)
        self.drop2 = Dropout(dropout_p, rng)
        self.drop3 = Dropout(dropout_p, rng)

    def forward(self, q, memory, pos, query_pos):
        qk = q + query_pos
        q = self.norm1(q + self.drop1(self.self_attn(qk, qk, q)))
        q = self.norm2(q + self.drop2(self.cross_attn(q + query_pos, memory + pos, memory)))
        q = self.norm3(q + self.drop3(self.ffn(q)))
        return q


class Encoder(Module):
    def __init__(self, n_layers, c, n_heads, ffn_hidden, dropout_p, rng, dtype):
        super().__init__()
        self.layers = ModuleList([
            EncoderLayer(c, n_heads, ffn_hidden, dropout_p, rng, dtype)
            for _ in range(n_layers)
        ])

    def forward(self, x, pos):
        for layer in self.layers:
            x = layer(x, pos)
        return x


class Decoder(Module):
    """Returns the query state after every layer (auxiliary supervision)."""

    def __init__(self, n_layers, c, n_heads, ffn_hidden, dropout_p, rng, dtype):
        super().__init__()
        self.layers = ModuleList([
            DecoderLayer(c, n_heads, ffn_hidden, dropout_p, rng, dtype)
            for _ in range(n_layers)
        ])

    def forward(self, memory, pos, query_pos):
        n = memory.shape[0]
        nq, c = query_pos.shape[-2], query_pos.shape[-1]
        q = T.Tensor(np.zeros((n, nq, c), dtype=memory.dtype))
        states = []
        for layer in self.layers:
            q = layer(q, memory, pos, query_pos)
            states.append(q)
        return states
