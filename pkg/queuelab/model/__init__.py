"""Queue description, validation, mean offspring matrix and stability classification."""
from queuelab.model.distributions import ServiceDistribution
from queuelab.model.offspring import (OffspringMatrix, StabilityReport, classify, k2_radical, k2_stability_condition,
                                      left_perron_vector, offspring_matrix, perron_vector, spectral_radius)
from queuelab.model.spec import ModelSpec, ValidationResult, Violation, load_spec, read_record, validate

__all__ = (
    'ServiceDistribution',
    'ModelSpec',
    'ValidationResult',
    'Violation',
    'OffspringMatrix',
    'StabilityReport',
    'classify',
    'k2_radical',
    'k2_stability_condition',
    'left_perron_vector',
    'load_spec',
    'offspring_matrix',
    'perron_vector',
    'read_record',
    'spectral_radius',
    'validate',
)
