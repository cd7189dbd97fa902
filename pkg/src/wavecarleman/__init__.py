"""Desk-scale Carleman-estimate laboratory for the Schrödinger equation on a waveguide."""

__version__ = "0.1.0"
