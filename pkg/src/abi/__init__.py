"""Engines for body-movement input techniques and their experiment harness.

Subpackages:

- ``proximity``: layered hand-distance input space and sensor fusion
- ``foottap``: semicircular foot-tap grid, hit-testing and classification
- ``walkline``: walking-lane dwell selection automaton and trial scoring
- ``gaitsim``: seeded synthetic motion (walking, taps, hand reaches)
- ``infospace``: shared drop space with an authoritative lifecycle
- ``harness``: counterbalanced experiment runner, statistics, persistence
- ``serve``: line-delimited JSON protocol servers for live operation
"""

__version__ = "0.1.0"
