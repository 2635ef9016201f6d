"""Offline evaluation of recommender rankings, including population commonality."""

__version__ = "0.1.0"
