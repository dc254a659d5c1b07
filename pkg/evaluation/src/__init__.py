# Closed-loop benchmarks for the simulated tactile sensor pipeline
__version__ = "0.1.0"
