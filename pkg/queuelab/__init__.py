"""
queuelab
~~~~~~~~

Stability, fluid, branching and transform analysis of a multiclass single-server queue whose
arrival rates depend on the class in service, checked against an event-driven simulator.

:license: MIT, see LICENSE for more details.

"""
__version__ = '1.0.0'
