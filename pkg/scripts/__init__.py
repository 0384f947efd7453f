# Benchmark and experiment scripts
