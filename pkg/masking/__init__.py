from .config import OBJECTIVES, CcmConfig, CfmConfig  # noqa: F401
from .models import ChannelBlock, MaskPlan, Policy, Span  # noqa: F401
from .sampling import apply_mask, build_mask_plan, sample_ccm, sample_cfm  # noqa: F401
