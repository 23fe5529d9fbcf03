"""
WrenchLab - Grasp robustness metrics and synthesis
Main package initialization
"""

__version__ = "0.1.0"
__author__ = "WrenchLab Contributors"
