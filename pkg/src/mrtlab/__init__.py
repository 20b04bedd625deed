"""mrtlab: exact Taylor-expansion analysis and float simulation of
multiple-relaxation-time lattice Boltzmann schemes."""

__version__ = "0.1.0"
