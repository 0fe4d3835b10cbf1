"""Relativistic Scott correction: channel spectral shifts of the Coulomb
Chandrasekhar and Schroedinger operators, Thomas-Fermi screening and a
verification harness."""

__version__ = "0.1.0"
