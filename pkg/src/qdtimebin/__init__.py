"""Time-bin entangled photon pairs from a quantum-dot biexciton cascade.

Modules: ``qcore`` (linear algebra), ``dynamics`` (driven four-level dot),
``source`` (pair states and emission sampling), ``analyzer`` (interferometer
statistics, time tags, coincidences), ``tomography`` (reconstruction and
entanglement measures) and ``cli`` (experiment runner).
"""

__version__ = "0.1.0"
