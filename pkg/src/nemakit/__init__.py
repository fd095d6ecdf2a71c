"""Nematode image classification with a DenseNet121 + Inception hybrid (NemaNet)."""

__version__ = "0.1.0"
