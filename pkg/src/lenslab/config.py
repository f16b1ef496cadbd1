"""Declarative manifold configs: a key = value text grammar plus named presets.

Grammar (one assignment per line, '#' starts a comment):

    kind = flat_product | surface_of_revolution | perturbed_product
    n = 2                      # flat/perturbed: disc dimension (>= 2)
    disc_radius = 1.0
    circle_length = 6.283185307179586
    trapped_budget = 3700.0    # optional, defaults to 1000 * diameter
    bump.amplitude = 0.05      # revolution profile
    bump.epsilon = 0.2
    bump.shift = 0.0
    perturbation.amplitude = 0.1
    perturbation.radius = 0.3
    perturbation.center = 0.2, 0.0
    perturbation.mode = disc   # disc | fiber | all

Unknown keys, malformed lines, and out-of-range values are rejected with the
offending line number and the violated constraint in the message.
"""

from __future__ import annotations

import hashlib
import os

from .errors import ConfigError, ContractError
from .manifold import (
    TWO_PI,
    BumpProfile,
    FlatProduct,
    ManifoldSpec,
    PerturbedProduct,
    SurfaceOfRevolution,
)

_KNOWN_KEYS = {
    "kind", "n", "disc_radius", "circle_length", "trapped_budget",
    "bump.amplitude", "bump.epsilon", "bump.shift",
    "perturbation.amplitude", "perturbation.radius", "perturbation.center",
    "perturbation.mode",
}


def parse_config_text(text: str) -> ManifoldSpec:
    """Parse the key = value grammar into a manifold spec."""
    raw: dict[str, tuple[str, int]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, value = (part.strip() for part in body.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"unknown key {key!r}", line=lineno)
        if key in raw:
            raise ConfigError(f"duplicate key {key!r}", line=lineno)
        raw[key] = (value, lineno)
    if "kind" not in raw:
        raise ConfigError("missing required key 'kind'")
    return _build_spec(raw)


def _take(raw, key, conv, default=None):
    if key not in raw:
        return default
    value, lineno = raw.pop(key)
    try:
        return conv(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key!r}: {exc}", line=lineno) from None


def _floats(value: str) -> tuple[float, ...]:
    return tuple(float(part) for part in value.split(","))


def _build_spec(raw) -> ManifoldSpec:
    kind_value, kind_line = raw.pop("kind")
    kind = kind_value.strip().lower()
    budget = _take(raw, "trapped_budget", float)
    try:
        if kind == "flat_product":
            spec = FlatProduct(
                n=_take(raw, "n", int, 2),
                disc_radius=_take(raw, "disc_radius", float, 1.0),
                circle_length=_take(raw, "circle_length", float, TWO_PI),
                trapped_budget=budget,
            )
        elif kind == "surface_of_revolution":
            profile = BumpProfile(
                amplitude=_take(raw, "bump.amplitude", float, 0.05),
                epsilon=_take(raw, "bump.epsilon", float, 0.2),
                shift=_take(raw, "bump.shift", float, 0.0),
            )
            spec = SurfaceOfRevolution(profile=profile, trapped_budget=budget)
        elif kind == "perturbed_product":
            base = FlatProduct(
                n=_take(raw, "n", int, 2),
                disc_radius=_take(raw, "disc_radius", float, 1.0),
                circle_length=_take(raw, "circle_length", float, TWO_PI),
            )
            center = _take(raw, "perturbation.center", _floats,
                           tuple(0.0 for _ in range(base.n)))
            spec = PerturbedProduct(
                base=base,
                amplitude=_take(raw, "perturbation.amplitude", float, 0.1),
                radius=_take(raw, "perturbation.radius", float, 0.3),
                center=center,
                mode=_take(raw, "perturbation.mode", str, "disc"),
                trapped_budget=budget,
            )
        else:
            raise ConfigError(
                "kind must be flat_product | surface_of_revolution | perturbed_product",
                line=kind_line,
            )
    except ContractError as exc:
        raise ConfigError(str(exc)) from None
    if raw:
        key, (_, lineno) = next(iter(raw.items()))
        raise ConfigError(f"key {key!r} does not apply to kind {kind!r}", line=lineno)
    return spec


def parse_config(path) -> ManifoldSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def spec_to_config(spec: ManifoldSpec) -> str:
    """Canonical config text for a spec (round-trips through the parser)."""
    lines = []
    if isinstance(spec, FlatProduct):
        lines += [
            "kind = flat_product",
            f"n = {spec.n}",
            f"disc_radius = {spec.disc_radius!r}",
            f"circle_length = {spec.circle_length!r}",
        ]
    elif isinstance(spec, SurfaceOfRevolution):
        p = spec.profile
        lines += [
            "kind = surface_of_revolution",
            f"bump.amplitude = {p.amplitude!r}",
            f"bump.epsilon = {p.epsilon!r}",
            f"bump.shift = {p.shift!r}",
        ]
    else:
        lines += [
            "kind = perturbed_product",
            f"n = {spec.base.n}",
            f"disc_radius = {spec.base.disc_radius!r}",
            f"circle_length = {spec.base.circle_length!r}",
            f"perturbation.amplitude = {spec.amplitude!r}",
            f"perturbation.radius = {spec.radius!r}",
            "perturbation.center = " + ", ".join(repr(c) for c in spec.center),
            f"perturbation.mode = {spec.mode}",
        ]
    if spec.trapped_budget is not None:
        lines.append(f"trapped_budget = {spec.trapped_budget!r}")
    return "\n".join(lines) + "\n"


def spec_fingerprint(spec: ManifoldSpec) -> str:
    """Short stable hash of the canonical config text."""
    return hashlib.sha256(spec_to_config(spec).encode()).hexdigest()[:16]


PRESETS = {
    "flat-d2s1": lambda: FlatProduct(n=2),
    "flat-d3s1": lambda: FlatProduct(n=3),
    "flat-cylinder": lambda: SurfaceOfRevolution(BumpProfile(amplitude=0.0)),
    "bump-cylinder": lambda: SurfaceOfRevolution(BumpProfile(0.05, 0.2, 0.0)),
    "perturbed-d2s1": lambda: PerturbedProduct(
        FlatProduct(n=2), amplitude=0.1, radius=0.3, center=(0.2, 0.0), mode="disc"
    ),
}


def resolve_spec(name_or_path: str) -> ManifoldSpec:
    """Resolve a preset name or a config file path into a spec."""
    if name_or_path in PRESETS:
        return PRESETS[name_or_path]()
    if os.path.exists(name_or_path):
        return parse_config(name_or_path)
    raise ConfigError(
        f"{name_or_path!r} is neither a preset ({', '.join(sorted(PRESETS))}) "
        "nor an existing config file"
    )
