"""Named two-phase composite presets (matrix = phase 1, fiber = phase 2)."""
import json
from importlib import resources

from .constitutive import ElasticOrthotropic, J2Plasticity, LinearElastic
from .errors import ConfigError

PRESET_NAMES = ("composite1", "composite2", "composite3")


def _law(spec):
    spec = {k: v for k, v in spec.items() if k != "role"}
    kind = spec.pop("kind", None)
    try:
        if kind == "j2":
            return J2Plasticity(**spec)
        if kind == "elastic_orthotropic":
            return LinearElastic.from_constants(ElasticOrthotropic(**spec))
        if kind == "elastic_isotropic":
            return LinearElastic.from_constants(ElasticOrthotropic.isotropic(spec["E"], spec["nu"]))
    except (TypeError, KeyError) as exc:
        raise ConfigError(f"bad material entry: {exc}") from exc
    raise ConfigError(f"unknown material kind {kind!r}")


def materials_from_dict(d):
    return _law(d["phase1"]), _law(d["phase2"])


def load_preset(name):
    """Return ``(phase1_law, phase2_law)`` for a preset name or JSON path."""
    if name in PRESET_NAMES:
        text = resources.files(__package__).joinpath("presets", f"{name}.json").read_text()
    else:
        try:
            with open(name) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"unknown composite {name!r}") from exc
    return materials_from_dict(json.loads(text))
