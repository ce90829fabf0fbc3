"""Pseudo-spectral tools for the Gross-Pitaevskii equation near the constant state."""
