"""Reference adapter processes speaking the model adapter protocol."""
