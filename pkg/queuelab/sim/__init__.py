from queuelab.sim.engine import BusyPeriodSample, SimConfig, SimPolicy, SimResult, SimSummary, Simulator, run
from queuelab.sim.probes import empirical_tail_ratio, fluid_scale_probe, stability_probe

__all__ = (
    'BusyPeriodSample',
    'SimConfig',
    'SimPolicy',
    'SimResult',
    'SimSummary',
    'Simulator',
    'empirical_tail_ratio',
    'fluid_scale_probe',
    'run',
    'stability_probe',
)
