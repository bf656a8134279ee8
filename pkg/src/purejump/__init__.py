"""purejump: exact monotone-path calculus and subordinator experiments."""

__version__ = "0.1.0"
