"""Stylized facts of high-frequency market data: tails, volatility memory,
multifractality, detrended cross-correlation networks and price impact."""

from .acf import autocorrelation, detect_power_law_ranges
from .dist import empirical_cdf, fit_stretched_exponential, fit_tail_exponent, group_average_cdf
from .impact import ImpactConfig, conditional_impact, model_selection
from .ingest import (BarSeries, align_calendars, asset_stats, log_returns, normalize, parse_bars,
                     parse_session_spec, volume_series)
from .mfractal import DetrendConfig, fluctuation_surface, hurst_spectrum, rho_q
from .network import correlation_matrix, hub_report, minimal_spanning_tree, to_distances
from .synth import GeneratorSpec, generate

__version__ = "0.1.0"
