"""
WrenchLab Data Module
Handles input loading and report emission
"""
