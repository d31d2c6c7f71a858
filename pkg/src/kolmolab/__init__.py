"""kolmolab: prefix codes, information measures, a toy complexity oracle,
sufficient statistics, rate-distortion and universal codes, at desk scale."""

__version__ = "0.1.0"
