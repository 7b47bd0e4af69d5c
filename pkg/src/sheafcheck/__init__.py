"""Claim-consistency checking with CNF sheaves and LLM pairwise ratings."""

__version__ = "0.1.0"
