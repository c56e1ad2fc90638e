"""PMI/PCMI response scoring and selection for knowledge-grounded dialogue."""

from .kernels import KERNEL_BACKEND
from .scoring import ScoreBundle, SpanSet, TokenizedText, TokenScoreSeries, derive_bundle
from .selection import CandidatePool, ThresholdConfig, fused_pcmi_select, max_pmi_select

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "ScoreBundle",
    "SpanSet",
    "TokenizedText",
    "TokenScoreSeries",
    "derive_bundle",
    "CandidatePool",
    "ThresholdConfig",
    "fused_pcmi_select",
    "max_pmi_select",
    "__version__",
]
