"""Locality-aware network coding over GF(2^8) with a deterministic P2P swarm simulator."""

__version__ = "0.1.0"
