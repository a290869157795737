"""squeezed-ladder: Jaynes-Cummings ladder climbing in a squeezed-Fock basis."""

__version__ = "0.1.0"
