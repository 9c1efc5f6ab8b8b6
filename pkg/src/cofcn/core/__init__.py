"""Shared models, configuration helpers, logging and errors."""
