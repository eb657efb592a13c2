"""Damped Kacanov iteration for the p(x)-Poisson problem with P1 finite elements."""
