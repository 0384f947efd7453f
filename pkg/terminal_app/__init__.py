"""
Terminal App Module

This module contains the command-line interface for running spoof detection experiments.
"""
