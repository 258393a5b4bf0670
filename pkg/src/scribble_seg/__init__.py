"""Scribble-supervised segmentation with a dual-branch network and mixed pseudo labels."""

__version__ = "0.1.0"
