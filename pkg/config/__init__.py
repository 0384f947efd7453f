# Settings and experiment defaults
