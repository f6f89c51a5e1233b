"""Loop re-rolling for straight-line kernels and HLS design-space exploration."""

__version__ = "0.1.0"
