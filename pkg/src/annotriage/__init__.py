"""LLM-assisted relation annotation with reliability-weighted aggregation and triage."""

__version__ = "0.1.0"
