"""Critical FK-Ising exploration paths, Loewner drivers and Bessel excursions."""

__version__ = "0.1.0"
