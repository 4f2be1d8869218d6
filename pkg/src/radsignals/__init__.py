"""Per-user radicalization signals over a Twitter corpus.

The package covers ingest into per-user aggregates, persistent seed
selection and validation, a seed lexicon, the four signals, k-means
clustering and the cluster-level analyses. :mod:`radsignals.pipeline`
chains the stages and :mod:`radsignals.cli` exposes them on the command
line.
"""

from .corpus import AnalysisWindow, TweetRecord, UserAggregate, ingest
from .signals import SIGNAL_NAMES, SignalVector, UndefinedSignal

__all__ = [
    "AnalysisWindow",
    "TweetRecord",
    "UserAggregate",
    "ingest",
    "SIGNAL_NAMES",
    "SignalVector",
    "UndefinedSignal",
]
__version__ = "0.1.0"
