"""Interpretable nonlinear Granger causality with generalised vector autoregression."""

__version__ = "0.1.0"
