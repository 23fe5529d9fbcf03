"""
WrenchLab Test Suite
"""
