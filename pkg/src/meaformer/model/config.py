"""Model configuration.

Two named variants: the full-scale config (256px, C=48, 6+6 transformer
layers) and the desk config used for CPU-scale experiments (64px, C=16,
2+2).  Step 1 predicts 2 box corners, step 2 the 4 diameter endpoints; the
head emits one segmentation plane plus one heatmap plane per query.
"""

from dataclasses import dataclass, fields

from ..errors import ConfigError


@dataclass(frozen=True)
class ModelConfig:
    input_size: int = 64
    channels: int = 16
    n_encoder_layers: int = 2
    n_decoder_layers: int = 2
    n_queries: int = 4
    n_heads: int = 8
    ffn_hidden: int = 0          # 0 -> 4 * channels
    reg_hidden: int = 96
    dropout: float = 0.1
    train_seg_head: bool = True  # step-1 models may disable mask supervision
    seed: int = 0

    def __post_init__(self):
        if self.n_queries not in (2, 4):
            raise ConfigError("n_queries must be 2 (box corners) or 4 (endpoints)")
        if self.channels % self.n_heads != 0:
            raise ConfigError("channels must be divisible by n_heads")
        if self.channels % 2 != 0:
            raise ConfigError("channels must be even (stem halves them)")
        if self.input_size % 4 != 0:
            raise ConfigError("input_size must be divisible by 4")

    @property
    def head_out_channels(self) -> int:
        return self.n_queries + 1

    @property
    def ffn_dim(self) -> int:
        return self.ffn_hidden or 4 * self.channels

    @property
    def feature_size(self) -> int:
        return self.input_size // 4

    @classmethod
    def paper_scale(cls, n_queries=4, **kw):
        return cls(input_size=256, channels=48, n_encoder_layers=6,
                   n_decoder_layers=6, n_queries=n_queries, **kw)

    @classmethod
    def desk(cls, n_queries=4, **kw):
        return cls(n_queries=n_queries, **kw)

    def canonical_text(self) -> str:
        lines = []
        for f in sorted(fields(self), key=lambda f: f.name):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                v = int(v)
            lines.append(f"{f.name}={v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ModelConfig":
        kw = {}
        types = {f.name: f.type for f in fields(cls)}
        for line in text.strip().splitlines():
            name, _, raw = line.partition("=")
            if name not in types:
                raise ConfigError(f"unknown config field {name!r}")
            t = types[name]
            if t in ("bool", bool):
                kw[name] = bool(int(raw))
            elif t in ("float", float):
                kw[name] = float(raw)
            else:
                kw[name] = int(raw)
        return cls(**kw)
