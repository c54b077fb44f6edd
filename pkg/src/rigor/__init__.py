"""Rigidity and flexibility of infinite bar-joint frameworks via truncation chains."""

__version__ = "0.1.0"
