"""Versioned JSON artifacts with lossless numpy array encoding."""
from __future__ import annotations

import base64
import hashlib
import json
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


def _encode(obj):
    if isinstance(obj, np.ndarray):
        arr = np.ascontiguousarray(obj)
        return {"__ndarray__": base64.b64encode(arr.tobytes()).decode("ascii"),
                "dtype": arr.dtype.str, "shape": list(arr.shape)}
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, dict):
        return {str(k): _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, float) and not np.isfinite(obj):
        return {"__float__": repr(obj)}
    return obj


def _decode(obj):
    if isinstance(obj, dict):
        if "__ndarray__" in obj:
            raw = base64.b64decode(obj["__ndarray__"])
            return np.frombuffer(raw, dtype=np.dtype(obj["dtype"])).reshape(obj["shape"]).copy()
        if "__float__" in obj:
            return float(obj["__float__"])
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    return obj


def dumps(kind: str, payload: dict) -> str:
    return json.dumps({"format": kind, "version": FORMAT_VERSION, **_encode(payload)},
                      sort_keys=True)


def loads(text: str, kind: str | None = None) -> dict:
    raw = json.loads(text)
    if kind is not None and raw.get("format") != kind:
        raise ValueError(f"expected a {kind!r} artifact, found {raw.get('format')!r}")
    if raw.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported artifact version {raw.get('version')}")
    return _decode(raw)


def save(path, kind: str, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(kind, payload))
    return path


def load(path, kind: str | None = None) -> dict:
    return loads(Path(path).read_text(), kind)


def fingerprint(names) -> str:
    """Stable short hash of an ordered list of feature names."""
    return hashlib.sha256(json.dumps(list(names)).encode()).hexdigest()[:16]
