"""Tomographic reconstruction, figures of merit and correction fits."""
