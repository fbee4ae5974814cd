"""Monte Carlo experiment engine."""
