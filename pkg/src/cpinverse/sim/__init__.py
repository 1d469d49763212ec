from .grid import Grid, SimulationConfig
from .records import GridBand, PointSource, ProbePosition, ProbeRecord, VolumeRecord
from .simulation import Media, Simulation, create_simulation, record_volume, run_with_source, step

__all__ = [
    "Grid", "SimulationConfig", "GridBand", "PointSource", "ProbePosition", "ProbeRecord",
    "VolumeRecord", "Media", "Simulation", "create_simulation", "record_volume",
    "run_with_source", "step",
]
