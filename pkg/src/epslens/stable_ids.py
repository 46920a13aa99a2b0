# epslens/stable_ids.py
from __future__ import annotations

import hashlib
import json
import math
from collections.abc import Mapping, Sequence
from typing import Any

import numpy as np
from pydantic import BaseModel


def _sha256_hex(s: str) -> str:
    return hashlib.sha256(s.encode("utf-8")).hexdigest()


def _plain(obj: Any) -> Any:
    """JSON-ready copy with models dumped and floats normalised (-0.0 -> 0.0)."""
    if isinstance(obj, BaseModel):
        return _plain(obj.model_dump(mode="json"))
    if isinstance(obj, Mapping):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return _plain(obj.item())
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise ValueError(f"cannot canonicalise non-finite float {obj}")
        return 0.0 if obj == 0 else obj
    return obj


def _canon(obj: Any) -> str:
    """
    Canonical JSON string (stable across runs) for hashing.
    """
    return json.dumps(_plain(obj), sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def payload_digest(results: Mapping[str, Any], certificates: Sequence[Any]) -> str:
    """Digest of a report's results and certificates; timing and version are excluded."""
    return "sha256:" + _sha256_hex(_canon({"results": results, "certificates": certificates}))


def derive_definition_id(document: BaseModel) -> str:
    """Content id for an exported definition, stable across runs."""
    return "def_" + _sha256_hex(_canon(document))[:16]
