"""Attention-based Bi-LSTM audio captioning, desk scale and framework free."""

__version__ = "0.1.0"
