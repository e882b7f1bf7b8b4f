import logging
import os
from fractions import Fraction
from typing import List

from pydantic import BaseModel, Field

logger = logging.getLogger(__name__)

# ----------------------------------------------------------------------
# Configuration – defaults, overridable from the environment
# ----------------------------------------------------------------------
DEFAULT_SEED = 1729
DEFAULT_TOLERANCE = 1e-9
DEFAULT_ALPHA_TOLERANCE = 1e-8
DEFAULT_NU_MAX = 6


def default_positivity_grid() -> List[Fraction]:
    """Sample points -3, -11/4, ..., 3 used for the admissibility check."""
    return [Fraction(i, 4) for i in range(-12, 13)]


class Settings(BaseModel):
    seed: int = Field(
        default=DEFAULT_SEED,
        description="Seed for the random vectors of the orbit sweep. Env: CURVHOM_SEED.",
    )
    tolerance: float = Field(
        default=DEFAULT_TOLERANCE,
        gt=0,
        description="Absolute residual accepted for floating-point model isomorphisms. Env: CURVHOM_TOLERANCE.",
    )
    alpha_tolerance: float = Field(
        default=DEFAULT_ALPHA_TOLERANCE,
        gt=0,
        description="Relative tolerance when comparing alpha invariants with curvature components.",
    )
    nu_max: int = Field(
        default=DEFAULT_NU_MAX,
        ge=2,
        description="Largest nu searched for a non-constant alpha invariant. Env: CURVHOM_NU_MAX.",
    )
    positivity_grid: List[Fraction] = Field(
        default_factory=default_positivity_grid,
        description="Values of y where the admissibility inequalities are sampled.",
    )


_ENVIRONMENT = {
    "seed": ("CURVHOM_SEED", int),
    "tolerance": ("CURVHOM_TOLERANCE", float),
    "nu_max": ("CURVHOM_NU_MAX", int),
}


def load_settings(**overrides) -> Settings:
    """
    Build the settings: explicit overrides win over the environment,
    which wins over the defaults.

    Args:
        **overrides: Field values; ``None`` entries are ignored.

    Returns:
        A validated Settings instance.
    """
    values = {}
    for field, (variable, cast) in _ENVIRONMENT.items():
        raw = os.getenv(variable)
        if raw is None or raw == "":
            continue
        try:
            values[field] = cast(raw)
        except ValueError:
            logger.warning("Ignoring %s=%r: not a valid %s", variable, raw, cast.__name__)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return Settings(**values)
