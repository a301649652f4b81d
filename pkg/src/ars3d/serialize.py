"""CSV/JSON emission with round-trip-safe number formatting."""

from __future__ import annotations

import json
import platform
import time
from pathlib import Path


def fmt(v) -> str:
    """17 significant digits: enough to round-trip any double."""
    if isinstance(v, str):
        return v
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, int):
        return str(v)
    return f"{float(v):.17g}"


def write_csv(path, header, rows) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_json(path, obj) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_coerce)
        fh.write("\n")


def _coerce(v):
    try:
        import numpy as np
        if isinstance(v, np.ndarray):
            return v.tolist()
        if isinstance(v, (np.floating, np.integer)):
            return v.item()
    except ImportError:  # pragma: no cover
        pass
    raise TypeError(f"not JSON serialisable: {type(v)}")


def write_manifest(out_path, command: str, parameters: dict,
                   wall_time_s: float) -> Path:
    """Run manifest next to the output file: <out>.manifest.json."""
    import numpy
    import scipy

    from . import __version__

    manifest_path = Path(str(out_path) + ".manifest.json")
    write_json(manifest_path, {
        "command": command,
        "parameters": parameters,
        "versions": {
            "ars3d": __version__,
            "numpy": numpy.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "wall_time_s": wall_time_s,
    })
    return manifest_path
