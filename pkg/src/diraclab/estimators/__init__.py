"""Named experiments verifying the desk-checkable statements of the model:
gap structure, Wegner counting, eigenfunction decay, resolvent regularity,
scale recursion, coupling probes, spectral averaging, and transport moments.
"""

from .gaps import GapReport, find_gap_edges, almost_sure_spectrum_scan
from .wegner import WegnerRecord, wegner_probe
from .decay import DecayFit, eigenfunction_decay_fit
from .regularity import (MsaSchedule, RegularityCheck, box_regularity,
                         bracket_6n, h1_probe, msa_probe)
from .combes_thomas import combes_thomas_probe, default_mask_pairs
from .birman_schwinger import birman_schwinger_coupling
from .averaging import spectral_averaging_check
from .edges import edge_distance_probe
from .dynamics import dynamical_moment, unit_cell_state
from .galscan import gal_gap_scan

__all__ = [
    "GapReport", "find_gap_edges", "almost_sure_spectrum_scan",
    "WegnerRecord", "wegner_probe", "DecayFit", "eigenfunction_decay_fit",
    "MsaSchedule", "RegularityCheck", "box_regularity", "bracket_6n",
    "h1_probe", "msa_probe", "combes_thomas_probe", "default_mask_pairs",
    "birman_schwinger_coupling", "spectral_averaging_check",
    "edge_distance_probe", "dynamical_moment", "unit_cell_state",
    "gal_gap_scan",
]
