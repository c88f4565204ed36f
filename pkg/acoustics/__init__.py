from .audio import crop_clips, load_wav, write_wav  # noqa: F401
from .cache import read_feature_cache, write_feature_cache  # noqa: F401
from .config import FEATURE_DIM, FeatureConfig  # noqa: F401
from .models import AudioClip, FrameSequence  # noqa: F401
from .services import extract_features  # noqa: F401
