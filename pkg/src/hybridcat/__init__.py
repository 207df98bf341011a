"""Simulation library for heralded generation of hybrid entanglement
between a time-bin single-photon qubit and a coherent-state qubit.

Two engines cover the interferometric network: a brute-force dense engine
over truncated Fock spaces (the oracle) and a fast branch engine that keeps
states as short superpositions of displaced Fock excitations.  A closed-form
library mirrors every quantitative result and the two routes cross-check
each other.
"""

__version__ = "0.1.0"

from .fock_dense import FockRegister, ModeLabel, TruncationPolicy

__all__ = ["FockRegister", "ModeLabel", "TruncationPolicy", "__version__"]
