"""Path-independent matrix algebras and gate-condition checks for ancilla-assisted control."""

__version__ = "0.1.0"

# Ancilla indices are 1-based in every public function, matching |1>, ..., |d_A>.
