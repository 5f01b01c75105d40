"""Damped waves on a lumpy torus: quasimodes, spectra, decay and resolvent scans."""

__version__ = "0.1.0"
