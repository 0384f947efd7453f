# Tests for the spoof-detection pipeline
