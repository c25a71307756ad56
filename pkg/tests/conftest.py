import argparse
import math

import pytest

from discretize.assembly import assemble
from discretize.grid import build_grid
from geometry.registry import resolve_model


def make_assembly(label: str, r_max: float, num_nodes: int, r_inner: float = 0.0):
    m = resolve_model(label)
    return assemble(m, build_grid(m, r_inner, r_max, num_nodes))


def shifted(a, c):
    """Same assembly with the potential sigma replaced by sigma - c."""
    low, high = a.sigma_bounds
    return a.model_copy(
        update={
            "potential_diag": a.potential_diag - c * a.mass_diag,
            "potential_off": a.potential_off - c * a.mass_off,
            "sigma_bounds": (low - c, high - c),
        }
    )


def component_namespace(component, **overrides) -> argparse.Namespace:
    parser = argparse.ArgumentParser()
    component.add_arguments(parser)
    args = parser.parse_args([])
    args.seed = 0
    args.quiet = True
    for key, value in overrides.items():
        setattr(args, key, value)
    return args


@pytest.fixture
def sphere_small():
    return make_assembly("sphere3", math.pi, 100)


@pytest.fixture
def flat_small():
    return make_assembly("flat3", 5.0, 60)
