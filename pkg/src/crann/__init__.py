"""CRANN: attention-based spatio-temporal forecasting toolkit.

The package bundles a small reverse-mode autodiff engine, the CRANN
forecaster (temporal attention encoder-decoder, spatial attention CNN,
dense fusion), four neural baselines, a leakage-safe evaluation pipeline
and attention/attribution interpretability exports.
"""

__version__ = "0.1.0"
