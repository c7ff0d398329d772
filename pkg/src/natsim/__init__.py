"""Geometric simulation of Hamiltonian and Lindbladian flows on pullback state-spaces."""

__version__ = "0.1.0"
