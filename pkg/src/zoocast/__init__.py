"""Zero-shot time-series forecasting from a zoo of lightweight
pre-trained one-variate models.

Pipeline: train small forecasters on diverse source datasets, learn a
representation extractor (masked reconstruction + contrastive constraint
+ transferability regression), match each target variate to zoo models by
embedding cosine, and forecast by recursive blocks with optional top-k
averaging.
"""

from . import bench, core, extractor, forecasters, fusion, zoo

__all__ = ["bench", "core", "extractor", "forecasters", "fusion", "zoo"]
__version__ = "0.1.0"
