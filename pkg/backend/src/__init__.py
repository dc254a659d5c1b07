"""Simulated vision-based tactile sensing: calibration, shape reconstruction and 6D force estimation."""
