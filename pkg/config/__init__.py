"""
Configuration package for leafaug.

This package contains constants, the environment loader and the settings
manager that turns one JSON file into a PipelineConfig.
"""
