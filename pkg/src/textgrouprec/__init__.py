"""Auto-detect user groups from review-text similarity and generate
order-aware group recommendations via consensus functions."""

__version__ = "0.1.0"
