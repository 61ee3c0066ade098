"""Test package for gwp-transform."""
