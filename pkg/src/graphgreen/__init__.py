"""Discrete potential theory on weighted graphs: Dirichlet Green functions,
capacities, unit-current path decompositions and Lane-Emden existence criteria."""

__version__ = "0.1.0"
