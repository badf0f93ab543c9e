"""Rough-surface terahertz channel simulation and QPSK link experiments.

Subpackages by concern:

- :mod:`thzlink.spectral`   time/frequency containers, DFT, reference pulse
- :mod:`thzlink.surface`    stochastic reflector sets and channel responses
- :mod:`thzlink.dispersion` group delay / dispersion and null finding
- :mod:`thzlink.modem`      QPSK link chain with AWGN and synchronization
- :mod:`thzlink.experiment` seeded Monte-Carlo sweeps and ensembles
- :mod:`thzlink.cli`        command-line front end
"""

__version__ = "0.1.0"
