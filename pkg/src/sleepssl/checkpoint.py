"""Named-tensor checkpoint container.

A checkpoint bundle is a directory holding ``weights.bin`` (raw
little-endian tensor bytes back to back), ``manifest.json`` mapping tensor
name to shape / dtype / byte offset, and optionally ``config.json`` with the
resolved run configuration.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch

from .errors import IoError

_DTYPES = {"float32": np.float32, "float64": np.float64, "int64": np.int64}


def save_checkpoint(
    state: dict[str, torch.Tensor],
    directory: str | Path,
    config: dict | None = None,
) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {}
    offset = 0
    with open(directory / "weights.bin", "wb") as fh:
        for name in sorted(state):
            array = state[name].detach().cpu().numpy()
            if array.dtype.name not in _DTYPES:
                array = array.astype(np.float32)
            raw = np.ascontiguousarray(array).astype(array.dtype.newbyteorder("<"))
            fh.write(raw.tobytes())
            manifest[name] = {
                "shape": list(array.shape),
                "dtype": array.dtype.name,
                "offset": offset,
            }
            offset += raw.nbytes
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2))
    if config is not None:
        (directory / "config.json").write_text(json.dumps(config, indent=2))
    return directory


def load_checkpoint(directory: str | Path) -> tuple[dict[str, torch.Tensor], dict | None]:
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    weights_path = directory / "weights.bin"
    if not manifest_path.exists() or not weights_path.exists():
        raise IoError(f"missing checkpoint at {directory}")
    manifest = json.loads(manifest_path.read_text())
    blob = weights_path.read_bytes()
    state = {}
    for name, meta in manifest.items():
        dtype = np.dtype(_DTYPES[meta["dtype"]]).newbyteorder("<")
        count = int(np.prod(meta["shape"])) if meta["shape"] else 1
        array = np.frombuffer(
            blob, dtype=dtype, count=count, offset=meta["offset"]
        ).reshape(meta["shape"])
        state[name] = torch.from_numpy(array.astype(meta["dtype"], copy=True))
    config_path = directory / "config.json"
    config = json.loads(config_path.read_text()) if config_path.exists() else None
    return state, config
