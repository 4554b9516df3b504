"""Photon-counting biometric authentication: detected-photon statistics,
exact protocol statistics, design optimization and seeded Monte Carlo."""

from .errors import (DomainError, DriftError, InsufficientSpotsError, InvariantError, NonAbsorptionError,
                     ParseError, PhotoAuthError, ScriptExhaustedError, SizeError)
from .photon_stats import Coherent, PerceptionModel, SinglePhoton, miss_and_false_probs, p_see
from .protocol_math import (StoppingDesign, alice_round_success, design_stopping, eve_round_success,
                            expected_rounds)

__version__ = "0.1.0"
