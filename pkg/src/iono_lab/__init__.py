"""Ionocraft yaw-control workbench: simulator, Lie-bracket controller and MBRL."""

__version__ = "0.1.0"
