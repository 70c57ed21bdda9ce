"""Subjective-study tooling, a learned low-light quality model, and
quality-guided enhancement training, glued by a common corpus format."""

__version__ = "0.1.0"

from . import dataio, enhance, iqa, metrics, study
from .iqa import QualityRegressor
from .enhance import LowLightEnhancer

__all__ = ["dataio", "enhance", "iqa", "metrics", "study",
           "QualityRegressor", "LowLightEnhancer", "__version__"]
