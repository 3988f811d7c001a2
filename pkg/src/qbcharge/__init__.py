"""Driven-dissipative charger/battery toolkit.

Simulation and analysis of quantum batteries charged through a driven,
dephased charger: master-equation integration, exact moment systems,
closed-form solutions, stochastic unravellings, and the energy/ergotropy/
charging-time figures of merit.
"""

__version__ = "0.1.0"

from .models import ModelKind, Params  # noqa: F401
