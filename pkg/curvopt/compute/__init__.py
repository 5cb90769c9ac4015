"""Numerical kernels: geometry, optimality conditions, curve tracing, reduced functional."""
