"""Context-aware demand forecasting for station-based bike sharing.

A time-series core (resampling, scaling, flow inference), context masking
channels, overlapping-window segmentation, classical baselines
(Holt-Winters, DTW/DBA, kNN), a from-scratch serial recurrent forecaster,
an evaluation harness with paired significance tests, a synthetic scenario
generator, and a configuration-driven CLI pipeline.
"""

from .series import ScalerParams, Station, TimeSeries

__version__ = "0.1.0"

__all__ = ["ScalerParams", "Station", "TimeSeries", "__version__"]
