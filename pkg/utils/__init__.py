"""
Shared utilities: logging, errors, seeded streams, helpers.
"""
