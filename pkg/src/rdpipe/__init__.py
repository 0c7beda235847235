"""Provider-agnostic LLM pipeline for research data processing."""

__version__ = "0.1.0"
