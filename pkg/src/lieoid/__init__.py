"""Exact Lie algebroid calculus: forms, morphisms, gauge symmetries and the Poisson sigma model."""

__version__ = "0.1.0"
