"""JSON serialization with fixed float formatting.

The stdlib encoder writes floats via repr(), whose digit count varies by
value. Artifacts here (models, priors, reports) must round-trip bit-exactly
and be byte-stable across runs, so floats are always written with 17
significant digits, which uniquely identifies any float64.
"""

import json
import math

import numpy as np


def _encode(obj, parts):
    if obj is None or obj is True or obj is False:
        parts.append("null" if obj is None else ("true" if obj else "false"))
    elif isinstance(obj, (bool, np.bool_)):
        parts.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        parts.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        obj = float(obj)
        if not math.isfinite(obj):
            raise ValueError(f"non-finite float {obj!r} cannot be serialized")
        parts.append(format(obj, ".17g"))
    elif isinstance(obj, str):
        parts.append(json.dumps(obj))
    elif isinstance(obj, (list, tuple)):
        parts.append("[")
        for i, item in enumerate(obj):
            if i:
                parts.append(", ")
            _encode(item, parts)
        parts.append("]")
    elif isinstance(obj, dict):
        parts.append("{")
        for i, (key, value) in enumerate(obj.items()):
            if not isinstance(key, str):
                raise TypeError(f"JSON object keys must be str, got {type(key)}")
            if i:
                parts.append(", ")
            parts.append(json.dumps(key))
            parts.append(": ")
            _encode(value, parts)
        parts.append("}")
    else:
        raise TypeError(f"cannot serialize {type(obj)} to JSON")


def dumps(obj):
    """Serialize to a JSON string with %.17g floats and insertion-ordered keys."""
    parts = []
    _encode(obj, parts)
    return "".join(parts)


def dump(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(obj))
        fh.write("\n")


def load(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
