"""Multi-agent object rearrangement planning with oracle heatmaps and prioritized SIPP."""

__version__ = "0.1.0"
