"""2D extended finite elements for fatigue crack growth in a plate."""

from .crack import CrackPolyline
from .fatigue import FatigueHistory, StopCriteria, kink_angle, run_fatigue
from .io import load_model, read_life_curve, write_crack_path, write_life_curve, write_vtk
from .model import TABLE1, TABLE1_EDGE, MacroModel
from .sif import compute_sifs, handbook_sent

__all__ = [
    "CrackPolyline",
    "FatigueHistory",
    "MacroModel",
    "StopCriteria",
    "TABLE1",
    "TABLE1_EDGE",
    "compute_sifs",
    "handbook_sent",
    "kink_angle",
    "load_model",
    "read_life_curve",
    "run_fatigue",
    "write_crack_path",
    "write_life_curve",
    "write_vtk",
]
