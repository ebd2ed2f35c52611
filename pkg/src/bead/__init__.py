"""Best-effort content deletion (erase) for content-centric networks: protocol
building blocks, a deterministic network simulator, and sizing calculators."""

__version__ = "0.1.0"
