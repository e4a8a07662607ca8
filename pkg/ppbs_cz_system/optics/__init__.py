"""Optical elements, circuits and the CZ gate built from them."""
