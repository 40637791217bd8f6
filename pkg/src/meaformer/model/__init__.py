"""Network, configuration and checkpoint persistence."""

from .config import ModelConfig  # noqa: F401
from .network import MeasurementNet, HeadOutput, HEAD_CHANNELS  # noqa: F401
from .checkpoint import (save_checkpoint, load_checkpoint, read_header,  # noqa: F401
                         checkpoint_digest)
from .transformer import sine_position_encoding  # noqa: F401
