"""Packets, widths, runtime settings and errors."""
