"""Ultra-small calibration and denoising toolkit for tri-axial MEMS gyroscopes."""

__version__ = "0.1.0"
