"""JSON schemas and loaders for engine configs and scene specs.

Validation errors carry a JSON-pointer path to the offending field so the
CLI can report exactly what to fix.
"""

from __future__ import annotations

import json

import jsonschema

from .blending import BlendConfig
from .body import ContactThresholds
from .engine import CharacterInit, EngineConfig, PredictorSpec
from .perception import PerceptionConfig
from .planner import PlannerConfig
from .predictor import GoalStateMix


class ConfigError(ValueError):
    """Invalid configuration; `pointer` is a JSON pointer to the bad field."""

    def __init__(self, message, pointer="/"):
        super().__init__(f"{pointer}: {message}")
        self.pointer = pointer


_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_VEC2 = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}
_VEC3 = {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3}

ENGINE_CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "frames": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "mode": {"enum": ["demos", "concat_baseline", "per_frame_baseline"]},
        "characters": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "properties": {"position": _VEC3, "yaw": _NUM},
            },
        },
        "predictor": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["procedural", "network"]},
                "weights_path": {"type": ["string", "null"]},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "blend": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "k": {"type": "integer", "minimum": 1},
                "nu": _POS,
                "m": {"type": "integer", "minimum": 0},
                "kappa": {"type": "number", "minimum": 0, "maximum": 1},
                "lowpass_cutoff": {"type": "integer", "minimum": 0},
                "lowpass_shape": {"enum": ["hard", "raised_cosine"]},
            },
        },
        "perception": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "k1": {"type": "integer", "minimum": 0},
                "l1": {"type": "integer", "minimum": 1},
                "l2": {"type": "integer", "minimum": 1},
                "k2": {"type": "integer", "minimum": 0},
                "s": _POS,
                "m": {"type": "integer", "minimum": 1},
                "c0": _NUM,
                "d_max": _POS,
                "e_default": _NUM,
            },
        },
        "planner": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "sigma_t": _POS,
                "step_max": _POS,
                "sit_rise": _VEC2,
                "lie_rise": _VEC2,
                "epsilon": _POS,
                "h_root": _POS,
                "h_root_sit": _POS,
                "h_root_lie": _POS,
            },
        },
        "contact": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"radius": _POS, "distance": _POS, "movement": _POS},
        },
        "goal_mix": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "locomotion": {"type": "number", "minimum": 0},
                "sitting": {"type": "number", "minimum": 0},
                "idle": {"type": "number", "minimum": 0},
                "lying": {"type": "number", "minimum": 0},
            },
        },
        "goal_retries": {"type": "integer", "minimum": 1},
        "body_path": {"type": ["string", "null"]},
    },
}

_PRIMITIVE_SCHEMAS = {
    "floor": {"extent": _VEC2, "center": _VEC2, "z": _NUM, "density": _POS},
    "box": {"center": _VEC3, "dims": _VEC3, "density": _POS},
    "stairs": {"origin": _VEC3, "rise": _POS, "run": _POS,
               "count": {"type": "integer", "minimum": 1}, "width": _POS,
               "direction": _VEC2, "density": _POS},
    "column": {"center": _VEC2, "radius": _POS, "height": _POS, "base_z": _NUM,
               "density": _POS},
}

SCENE_SPEC_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "frame_rate": _POS,
        "density": _POS,
        "primitives": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["kind"],
                "properties": {"kind": {"enum": list(_PRIMITIVE_SCHEMAS)}},
                "allOf": [
                    {
                        "if": {"properties": {"kind": {"const": kind}}},
                        "then": {
                            "properties": {"kind": {}, **props},
                            "additionalProperties": False,
                        },
                    }
                    for kind, props in _PRIMITIVE_SCHEMAS.items()
                ],
            },
        },
        "movers": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["keyframes"],
                "properties": {
                    "id": {"type": "string"},
                    "density": _POS,
                    "shape": {
                        "type": "object",
                        "properties": {
                            "kind": {"enum": ["box", "column"]},
                            "dims": _VEC3,
                            "radius": _POS,
                            "height": _POS,
                        },
                        "additionalProperties": False,
                    },
                    "keyframes": {
                        "type": "array",
                        "minItems": 1,
                        "items": {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["frame", "translation"],
                            "properties": {
                                "frame": {"type": "integer", "minimum": 0},
                                "translation": _VEC3,
                                "yaw": _NUM,
                            },
                        },
                    },
                },
            },
        },
    },
}


def _validate(doc: dict, schema: dict) -> None:
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        pointer = "/" + "/".join(str(p) for p in err.absolute_path)
        raise ConfigError(err.message, pointer or "/")


def validate_engine_config(doc: dict) -> None:
    _validate(doc, ENGINE_CONFIG_SCHEMA)


def validate_scene_spec(doc: dict) -> None:
    _validate(doc, SCENE_SPEC_SCHEMA)


def engine_config_from_json(doc: dict) -> EngineConfig:
    """Build an EngineConfig from a validated JSON document."""
    validate_engine_config(doc)

    def sub(name, cls, **renames):
        raw = dict(doc.get(name, {}))
        for json_key, attr in renames.items():
            if json_key in raw:
                raw[attr] = raw.pop(json_key)
        if name == "planner":
            for key in ("sit_rise", "lie_rise"):
                if key in raw:
                    raw[key] = tuple(raw[key])
        try:
            return cls(**raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), f"/{name}") from None

    characters = [
        CharacterInit(position=tuple(c.get("position", (0.0, 0.0, 0.9))),
                      yaw=float(c.get("yaw", 0.0)))
        for c in doc.get("characters", [{}])
    ]
    try:
        return EngineConfig(
            frames=int(doc.get("frames", 300)),
            seed=int(doc.get("seed", 0)),
            mode=doc.get("mode", "demos"),
            characters=characters,
            blend=sub("blend", BlendConfig),
            perception=sub("perception", PerceptionConfig),
            planner=sub("planner", PlannerConfig),
            contact=sub("contact", ContactThresholds),
            goal_mix=sub("goal_mix", GoalStateMix),
            predictor=sub("predictor", PredictorSpec),
            goal_retries=int(doc.get("goal_retries", 5)),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), "/") from None


def load_engine_config(path) -> tuple[EngineConfig, dict]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return engine_config_from_json(doc), doc


def load_scene_spec(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    validate_scene_spec(doc)
    return doc
