"""
Test helper utilities for WrenchLab

This package provides factory functions for wrench sets, grasps, LPs and
input files. Helpers should NOT contain assertions - keep assertions in
test files.
"""
