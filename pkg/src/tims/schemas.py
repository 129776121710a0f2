"""Wire-format validation for telemetry messages.

Every message on the bus is an envelope (device identity, sequence number,
timestamp, payload); every payload carries a "schema" tag naming its own
format. The JSON Schema documents ship inside the package (wire_schemas/)
and are mirrored at the repository root schemas/ for non-Python consumers;
a test keeps the two copies byte-identical.
"""

from __future__ import annotations

import json
from importlib import resources

import jsonschema

_SCHEMA_FILES = {
    "tims/envelope/1": "envelope.schema.json",
    "tims/leader/1": "leader.schema.json",
    "tims/follower/1": "follower.schema.json",
    "tims/haptic/1": "haptic.schema.json",
    "tims/scene/1": "scene.schema.json",
    "tims/wtd/1": "wtd.schema.json",
    "tims/pedal/1": "pedal.schema.json",
    "tims/layout/1": "layout.schema.json",
}

PAYLOAD_SCHEMA_IDS = tuple(k for k in _SCHEMA_FILES if k != "tims/envelope/1")

# Well-known bus devices and the payload schema each must carry. Devices not
# listed here (ad-hoc probes, tests) get envelope-level checks only.
DEVICE_SCHEMAS = {
    "leader": "tims/leader/1",
    "follower": "tims/follower/1",
    "haptic": "tims/haptic/1",
    "scene": "tims/scene/1",
    "wtd": "tims/wtd/1",
    "pedal": "tims/pedal/1",
    "layout": "tims/layout/1",
}


class SchemaError(ValueError):
    """Message failed validation; str(err) names the offending field."""


def _schema_text(filename: str) -> str:
    return resources.files("tims").joinpath("wire_schemas", filename).read_text("utf-8")


def _load_validators() -> dict:
    validators = {}
    for schema_id, filename in _SCHEMA_FILES.items():
        schema = json.loads(_schema_text(filename))
        jsonschema.Draft202012Validator.check_schema(schema)
        validators[schema_id] = jsonschema.Draft202012Validator(schema)
    return validators


_VALIDATORS = _load_validators()


def _raise_first_error(validator, obj, label: str) -> None:
    error = jsonschema.exceptions.best_match(validator.iter_errors(obj))
    if error is not None:
        path = ".".join(str(p) for p in error.absolute_path) or "<root>"
        raise SchemaError(f"{label}: field {path!r}: {error.message}")


def validate_payload(payload: dict) -> None:
    """Check a payload against the schema named by its own tag."""
    if not isinstance(payload, dict):
        raise SchemaError(f"payload must be an object, got {type(payload).__name__}")
    tag = payload.get("schema")
    validator = _VALIDATORS.get(tag)
    if validator is None:
        raise SchemaError(f"unknown payload schema tag {tag!r}")
    _raise_first_error(validator, payload, tag)


def validate_for_device(device_id: str, payload: dict) -> None:
    """Check a payload against the schema its device is required to carry.

    Devices outside DEVICE_SCHEMAS are accepted as-is: new device ids may
    appear before their format is pinned down.
    """
    required = DEVICE_SCHEMAS.get(device_id)
    if required is None:
        return
    if not isinstance(payload, dict):
        raise SchemaError(f"payload must be an object, got {type(payload).__name__}")
    tag = payload.get("schema")
    if tag != required:
        raise SchemaError(
            f"device {device_id!r}: field 'schema': expected {required!r}, got {tag!r}")
    _raise_first_error(_VALIDATORS[required], payload, required)


def validate_envelope_obj(obj: dict, check_payload: bool = True) -> None:
    """Check a decoded envelope; optionally also its device payload."""
    _raise_first_error(_VALIDATORS["tims/envelope/1"], obj, "envelope")
    if check_payload:
        validate_for_device(obj["device_id"], obj["payload"])


def schema_for(tag: str) -> dict:
    """Return the raw schema document for a tag (for tooling and tests)."""
    if tag not in _SCHEMA_FILES:
        raise KeyError(tag)
    return json.loads(_schema_text(_SCHEMA_FILES[tag]))
