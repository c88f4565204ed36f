from .models import FoldAssignment, PredictionSet  # noqa: F401
from .services import accuracy, pr_auc_macro, roc_auc_macro, tag_report  # noqa: F401
