"""Event-driven simulation of gated-micropipeline and clocked FIR filters."""

__version__ = "0.1.0"
