"""flowcompile: compile conversational procedure flowgraphs into fine-tuning
datasets, run them under three serving conditions, and evaluate the results."""

__version__ = "0.1.0"
