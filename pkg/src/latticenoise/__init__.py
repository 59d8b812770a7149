"""Lattice-dilation design of single-qubit noise channels.

A target channel's Pauli Gram matrix is matched by a quasi-momentum
dependent SU(2) field, which a QWP-HWP-QWP stack of patterned waveplates
realizes sample by sample.
"""

__version__ = "0.1.0"
