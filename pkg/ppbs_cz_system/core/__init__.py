"""
Core module for the PPBS CZ system.

Provides the few-photon Fock-state engine (labeled modes, transfer
matrices, permanent-based evolution, post-selection) and the shared
exception hierarchy.
"""
