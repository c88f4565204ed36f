from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint  # noqa: F401
from .config import ModelConfig, TaskSpec, get_preset  # noqa: F401
from .models import FrameEncoder, count_parameters, encode_representations, positional_encoding  # noqa: F401
