"""Desk-scale laboratory for continual language-model pre-training under language shift."""

__version__ = "0.1.0"
