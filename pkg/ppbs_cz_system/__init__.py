"""
ppbs_cz_system
PURPOSE: Simulation and analysis toolkit for the partially-polarising
beamsplitter controlled-Z gate and its use as a Bell-state analyser.
"""

__version__ = "1.0.0"
