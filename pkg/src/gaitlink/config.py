"""Configuration documents.

A single JSON file can override the simulation constants, the terrain,
and any gait's targets or gains.  Everything is optional; omitted parts
fall back to the built-in defaults.
"""

from __future__ import annotations

import json
from dataclasses import replace

from .dynamics import SimConfig, Terrain
from .gaits import GaitSpec, default_gaits

_GAIT_FIELDS = ("target_speed", "target_apex", "raibert_gain", "thrust_gain",
                "speed_err_max", "standing", "period", "nominal_apex")


def load_config(path: str | None) -> tuple[SimConfig, Terrain, dict[str, GaitSpec]]:
    """Load (SimConfig, Terrain, gait library) from a JSON document."""
    if path is None:
        return SimConfig(), Terrain(), default_gaits()
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError("config document must be a JSON object")

    base_sim = SimConfig().to_dict()
    sim_doc = doc.get("sim", {})
    unknown = set(sim_doc) - set(base_sim)
    if unknown:
        raise ValueError(f"unknown sim fields: {sorted(unknown)}")
    base_sim.update(sim_doc)
    cfg = SimConfig.from_dict(base_sim)

    terrain = Terrain.from_dict(doc["terrain"]) if "terrain" in doc else Terrain()

    gaits = default_gaits()
    for entry in doc.get("gaits", []):
        name = entry.get("id")
        if not name:
            raise ValueError("gait entry without an id")
        fields = {k: v for k, v in entry.items() if k != "id"}
        unknown = set(fields) - set(_GAIT_FIELDS)
        if unknown:
            raise ValueError(f"unknown gait fields for {name}: {sorted(unknown)}")
        if "nominal_apex" in fields and fields["nominal_apex"] is not None:
            fields["nominal_apex"] = tuple(fields["nominal_apex"])
        if name in gaits:
            gaits[name] = replace(gaits[name], **fields)
        else:
            gaits[name] = GaitSpec(id=name, **fields)
    return cfg, terrain, gaits
