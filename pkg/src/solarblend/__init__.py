"""Cluster-aware short-term solar irradiance forecasting.

Daily irradiance profiles are clustered by a voting ensemble of four
clustering algorithms and three validity indices; a day's cluster is then
recognized from its first four hours by a multiclass SVM, and hour-ahead
GHI forecasts come from per-cluster two-layer blended model ensembles.
"""

from .clustering import Partition, ahc_average, dhc, kmeans, kmedoids, pairwise_distances
from .evaluation import improvement, nmae, nrmse
from .forecasting import ForecastBundle, M3Regressor, persistence_cloudiness
from .occur import ClusteringOutcome, run_occur
from .recognition import SvmPatternClassifier, pr_metrics
from .validity import connectivity, dunn, silhouette

__version__ = "0.1.0"

__all__ = [
    "Partition", "ahc_average", "dhc", "kmeans", "kmedoids",
    "pairwise_distances", "improvement", "nmae", "nrmse", "ForecastBundle",
    "M3Regressor", "persistence_cloudiness", "ClusteringOutcome", "run_occur",
    "SvmPatternClassifier", "pr_metrics", "connectivity", "dunn", "silhouette",
    "__version__",
]
