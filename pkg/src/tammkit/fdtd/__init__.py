"""Body-of-revolution FDTD in (r, z) for one azimuthal order m."""

from .analysis import FieldMap, extract_resonances, field_map, lateral_fraction
from .model import GridSpec, Scene, SourceSpec, grid_for_scene
from .raster import rasterize
from .solver import PMLSettings, RunResult, Simulation, run
from .study import default_scene, fdtd_mode_table

__all__ = ["FieldMap", "GridSpec", "PMLSettings", "RunResult", "Scene", "Simulation",
           "SourceSpec", "default_scene", "extract_resonances", "fdtd_mode_table",
           "field_map", "grid_for_scene", "lateral_fraction", "rasterize", "run"]
