"""fbqkd: simulator and analysis toolkit for frequency-bin entanglement QKD.

Library layout:

- ``spectrum``: biphoton comb bookkeeping, JSI tables, channel planning
- ``qudit``: qudit states, measurement bases, projection statistics
- ``link``: physical rate model (source, losses, darks, Voigt window)
- ``keyrate``: QBER, d-ary entropy, secure-key-rate bound, thresholds
- ``sweep``: operating-point cartography, attenuation range scans
- ``timetag``: Monte Carlo event streams, coincidence counting, peak fits
- ``cli``: command-line front end (``fbqkd --help``)
"""

from . import keyrate, link, qudit, spectrum, sweep, timetag

__all__ = ["keyrate", "link", "qudit", "spectrum", "sweep", "timetag"]

__version__ = "0.1.0"
