"""Coarse embeddings of finite metric spaces into products of trees."""

__version__ = "0.1.0"
