"""Lite multi-resolution backbone.

Stem of two stride-2 convs (3 -> C/2 -> C), then two stages that each keep a
quarter-resolution branch (C channels) and an eighth-resolution branch (2C
channels) with residual blocks and bidirectional fusion: 1x1 conv + bilinear
2x upsampling on the way up, stride-2 3x3 conv on the way down.  The
quarter-resolution branch is the output feature map.
"""

from ..numcore import BatchNorm2d, Conv2d, Module, ModuleList, relu, upsample2x


class ResidualBlock(Module):
    def __init__(self, c, rng, dtype):
        super().__init__()
        self.conv1 = Conv2d(c, c, 3, rng=rng, dtype=dtype)
        self.bn1 = BatchNorm2d(c, relu=True, dtype=dtype)
        self.conv2 = Conv2d(c, c, 3, rng=rng, dtype=dtype)
        self.bn2 = BatchNorm2d(c, relu=False, dtype=dtype)

    def forward(self, x):
        y = self.bn2(self.conv2(self.bn1(self.conv1(x))))
        return relu(x + y)


class FusionStage(Module):
    def __init__(self, c, rng, dtype):
        super().__init__()
        self.block_hi = ResidualBlock(c, rng, dtype)
        self.block_lo = ResidualBlock(2 * c, rng, dtype)
        self.lo_to_hi = Conv2d(2 * c, c, 1, rng=rng, dtype=dtype)
        self.hi_to_lo = Conv2d(c, 2 * c, 3, stride=2, pad=1, rng=rng, dtype=dtype)

    def forward(self, hi, lo):
        hi = self.block_hi(hi)
        lo = self.block_lo(lo)
        hi_out = relu(hi + upsample2x(self.lo_to_hi(lo)))
        lo_out = relu(lo + self.hi_to_lo(hi))
        return hi_out, lo_out


class LiteBackbone(Module):
    """(N,3,H,W) -> (N,C,H/4,W/4)."""

    def __init__(self, channels, rng, dtype):
        super().__init__()
        c = channels
        self.stem1 = Conv2d(3, c // 2, 3, stride=2, pad=1, rng=rng, dtype=dtype)
        self.stem_bn1 = BatchNorm2d(c // 2, relu=True, dtype=dtype)
        self.stem2 = Conv2d(c // 2, c, 3, stride=2, pad=1, rng=rng, dtype=dtype)
        self.stem_bn2 = BatchNorm2d(c, relu=True, dtype=dtype)
        self.down = Conv2d(c, 2 * c, 3, stride=2, pad=1, rng=rng, dtype=dtype)
        self.down_bn = BatchNorm2d(2 * c, relu=True, dtype=dtype)
        self.stages = ModuleList([FusionStage(c, rng, dtype) for _ in range(2)])

    def forward(self, x):
        hi = self.stem_bn2(self.stem2(self.stem_bn1(self.stem1(x))))
        lo = self.down_bn(self.down(hi))
        for stage in self.stages:
            hi, lo = stage(hi, lo)
        return hi
