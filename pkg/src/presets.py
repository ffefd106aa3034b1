"""
Named parameter sets used by the shipped experiments, the tests and the API
"""
from typing import Dict, List

from .ecology import EcologyParams


def _uniform(value: float) -> tuple:
    return tuple((value,) * 3 for _ in range(3))


PRESETS: Dict[str, EcologyParams] = {
    # One beneficial mutant ousting the resident; C identically 1
    'single_sweep': EcologyParams(
        beta=(2.0, 3.0, 3.0), delta=(0.5, 0.5, 0.5), comp=_uniform(1.0),
        carrying_capacity=1000, alpha=0.5),
    # Second mutant invades faster because the first one weakens the resident
    'speedup': EcologyParams(
        beta=(2.0, 2.0, 2.0), delta=(0.0, 0.0, 0.0),
        comp=((1.8, 4.0, 3.0),
              (1.0, 2.3, 3.0),
              (1.5, 1.0, 2.1)),
        carrying_capacity=1000, alpha=0.5),
    # Late second mutant removes the first and then disappears itself
    'annihilation': EcologyParams(
        beta=(2.0, 2.0, 2.0), delta=(0.0, 0.0, 0.0),
        comp=((1.8, 2.5, 1.5),
              (1.0, 2.3, 5.0),
              (3.0, 1.0, 2.1)),
        carrying_capacity=1000, alpha=1.9),
    # Cyclic dominance 0≺1≺2≺0 with equal resident densities
    'cyclic': EcologyParams(
        beta=(2.0, 2.0, 2.0), delta=(0.0, 0.0, 0.0),
        comp=((2.0, 2.5, 1.0),
              (1.0, 2.0, 3.0),
              (3.0, 1.0, 2.0)),
        carrying_capacity=1000, alpha=1.1),
    # Bacterial strains with a limit cycle; growth rates enter as birth rates
    'bacterial_cycle': EcologyParams(
        beta=(1.156, 1.0, 2.0), delta=(0.0, 0.0, 0.0),
        comp=((2.0, 1.0, 1.0),
              (1.0, 0.844, 1.0),
              (3.84, 1.0, 1.75)),
        carrying_capacity=1000, alpha=0.0),
}


def get_preset(name: str) -> EcologyParams:
    """
    Look up a preset by name.

    Raises:
        ValueError: If the name is unknown
    """
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f'Unknown preset: {name}. Available: {", ".join(sorted(PRESETS))}')


def list_presets() -> List[str]:
    return sorted(PRESETS)
