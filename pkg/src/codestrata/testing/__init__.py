"""Hermetic test helpers: the scriptable stub language server and the
toy-language transcript generator. Shipped inside the package so run
configurations can launch them with `python -m`."""
