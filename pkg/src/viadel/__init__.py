"""Viability-based feedback control for a delayed SIR model under an ICU constraint."""
from .model import (DEFAULT_PARAMS, Constant, DomainError, ExpRecovery, ExpSurge, Params,
                    Sampled, SolverError, State, ValidationError)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_PARAMS", "Constant", "DomainError", "ExpRecovery", "ExpSurge", "Params",
    "Sampled", "SolverError", "State", "ValidationError",
]
