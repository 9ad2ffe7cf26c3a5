"""Transport problem, representation formula and Monte Carlo estimation."""
