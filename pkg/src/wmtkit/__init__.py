"""Corpus filtering, backtranslation sampling, noisy-channel decoding and MT metrics."""

__version__ = "0.1.0"
