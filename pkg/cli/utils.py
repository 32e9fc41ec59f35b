import json
import os
import logging

import numpy as np

logger = logging.getLogger(__name__)


def to_jsonable(obj):
    """Plain JSON types; non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if np.isfinite(value) else None
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    return str(obj)


def dumps(obj) -> str:
    # json writes floats with repr, the shortest round-trip form
    return json.dumps(to_jsonable(obj), indent=2, allow_nan=False) + "\n"


def ensure_dir(path: str) -> str:
    if path and not os.path.exists(path):
        os.makedirs(path)
    return path


def write_text(out_dir: str, name: str, text: str) -> str:
    path = os.path.join(ensure_dir(out_dir), name)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    logger.info(f"Wrote {path}")
    return path


def write_json(out_dir: str, name: str, obj) -> str:
    return write_text(out_dir, name, dumps(obj))
