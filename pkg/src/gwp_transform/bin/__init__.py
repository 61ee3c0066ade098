"""
Entry point scripts for gwpt CLI commands.
"""
