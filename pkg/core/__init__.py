# PMU spoof-detection pipeline package
