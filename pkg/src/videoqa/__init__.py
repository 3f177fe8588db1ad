"""Desk-scale video question answering over synthetic temporal scenes."""

__version__ = "0.1.0"
