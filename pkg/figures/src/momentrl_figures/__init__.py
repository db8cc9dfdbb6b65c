"""Publication-style figures from the momentrl experiment outputs.

This package is deliberately independent of the simulation library: it
consumes only the documented CSV files and summary.json that the
`momentrl` command publishes.
"""

__version__ = "0.1.0"
