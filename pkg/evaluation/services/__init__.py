# crossval is imported by path; it depends on training, which depends on these metrics
from .metrics import accuracy, pr_auc_macro, roc_auc_macro, tag_report  # noqa: F401
