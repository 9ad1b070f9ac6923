"""Statics, nonlinear dynamics, modal analysis and shape control of
clustered tensegrity structures."""
