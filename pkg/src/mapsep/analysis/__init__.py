"""Static analysis computing an over-approximate Last Writes relation."""

from .analyzer import AnalysisResult, analyze, satisfies, transfer
from .domain import AState, Universe, join, leq

__all__ = ["AState", "AnalysisResult", "Universe", "analyze", "join", "leq", "satisfies", "transfer"]
