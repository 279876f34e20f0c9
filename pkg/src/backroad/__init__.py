"""backroad: desk-scale workbench for spatio-temporal trigger attacks on
Q-learning driving agents."""

__version__ = "0.1.0"
