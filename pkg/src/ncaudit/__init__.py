"""Audit tabular decision systems against a rule-based reference relation."""
from __future__ import annotations

__version__ = "0.1.0"
