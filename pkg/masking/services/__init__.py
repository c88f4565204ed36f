from .stats import ccm_statistics, cfm_statistics, truncated_geometric_mean, truncated_geometric_pmf  # noqa: F401
