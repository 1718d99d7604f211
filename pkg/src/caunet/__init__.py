"""Relation learning toolkit: contrast association units, baseline relation
layers, multiplicative-update training and homography task evaluation."""

__version__ = "0.1.0"
