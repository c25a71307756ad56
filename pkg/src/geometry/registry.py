"""Model registry: label strings such as ``sphere3`` or ``cylbump3:c=0.5,w=1``."""

from typing import Callable, Dict, List
import logging
import re

from geometry.model_manifold import ModelManifold
from geometry.warp_profiles import (
    WarpProfile,
    cylinder_bump_profile,
    flat_profile,
    hyperbolic_profile,
    sphere_profile,
)
from utils.errors import ArgumentError, ConfigError

logger = logging.getLogger(__name__)

_LABEL = re.compile(r"^(?P<kind>[a-z]+)(?P<n>\d+)(?::(?P<params>.*))?$")

# kind -> (factory, accepted parameter names, description)
MODEL_KINDS: Dict[str, tuple] = {
    "sphere": (lambda **kw: sphere_profile(), (), "round sphere, f = sin r on [0, pi]"),
    "flat": (lambda **kw: flat_profile(), (), "Euclidean space, f = r"),
    "hyperbolic": (lambda **kw: hyperbolic_profile(), (), "hyperbolic space, f = sinh r"),
    "cylbump": (
        lambda c=0.5, w=1.0: cylinder_bump_profile(c_inf=c, blend_width=w),
        ("c", "w"),
        "flat core blended into a cylindrical end of radius c over width w",
    ),
}


def _parse_params(text: str, label: str) -> Dict[str, float]:
    params = {}
    if not text:
        return params
    for item in text.split(","):
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"malformed parameter '{item}' in model label '{label}'")
        try:
            params[key.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"non-numeric parameter '{item}' in model label '{label}'")
    return params


def resolve_model(label: str) -> ModelManifold:
    match = _LABEL.match(label.strip())
    if match is None or match.group("kind") not in MODEL_KINDS:
        raise ConfigError(f"unknown model label '{label}'; known kinds: {sorted(MODEL_KINDS)}")
    kind = match.group("kind")
    n = int(match.group("n"))
    if n < 3:
        raise ConfigError(f"model '{label}' needs dimension >= 3")
    factory, accepted, _ = MODEL_KINDS[kind]
    params = _parse_params(match.group("params"), label)
    unknown = sorted(set(params) - set(accepted))
    if unknown:
        raise ConfigError(f"unknown parameter(s) {unknown} for model '{label}'")
    try:
        warp: WarpProfile = factory(**params)
    except ArgumentError as e:
        raise ConfigError(f"model '{label}': {e}")
    logger.info(f"Resolved model {label} (n={n}, kind={warp.kind.value})")
    return ModelManifold(n=n, warp=warp, r_pole=warp.pole_anchored, label=label)


def list_models() -> List[Dict[str, str]]:
    return [
        {"label": f"{kind}<n>" + (":" + ",".join(f"{p}=<value>" for p in accepted) if accepted else ""),
         "description": description}
        for kind, (_, accepted, description) in MODEL_KINDS.items()
    ]
