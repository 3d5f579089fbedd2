"""Checkpoint format: weights.bin (little-endian float32 blob) plus
manifest.json (hyperparameters, seed, epoch, loss history, tensor index).

Weights round-trip exactly because the models run in float32.
"""
import json
from pathlib import Path

import numpy as np
import torch

from ..errors import SchemaError
from ..ingest import NormalizationRecord
from .training import TrainConfig, VaeGanModel, VanillaGanModel, config_to_dict

WEIGHTS_FILE = "weights.bin"
MANIFEST_FILE = "manifest.json"


def save_checkpoint(model, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    tensors = []
    blob = bytearray()
    for comp_name, module in model.components().items():
        for pname, tensor in module.state_dict().items():
            arr = tensor.detach().cpu().numpy().astype("<f4")
            tensors.append(
                {
                    "name": f"{comp_name}.{pname}",
                    "shape": list(arr.shape),
                    "offset": len(blob),
                }
            )
            blob += arr.tobytes()

    (directory / WEIGHTS_FILE).write_bytes(bytes(blob))
    manifest = {
        "kind": model.kind,
        "config": config_to_dict(model.config),
        "channel": model.channel,
        "normalization": (
            None if model.norm is None else {"min": model.norm.vmin, "max": model.norm.vmax}
        ),
        "epoch": model.epoch,
        "history": model.history,
        "dtype": "float32",
        "byte_order": "little",
        "tensors": tensors,
    }
    (directory / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_checkpoint(directory):
    """Rebuild a VaeGanModel or VanillaGanModel from a checkpoint directory."""
    directory = Path(directory)
    manifest_path = directory / MANIFEST_FILE
    weights_path = directory / WEIGHTS_FILE
    if not manifest_path.exists() or not weights_path.exists():
        raise SchemaError(f"checkpoint directory {directory} is missing manifest or weights")
    manifest = json.loads(manifest_path.read_text())

    config = TrainConfig(**manifest["config"])
    norm = manifest.get("normalization")
    record = None if norm is None else NormalizationRecord(vmin=norm["min"], vmax=norm["max"])
    kind = manifest.get("kind")
    if kind == "vaegan":
        model = VaeGanModel(config, channel=manifest["channel"], norm=record)
    elif kind == "gan":
        model = VanillaGanModel(config, channel=manifest["channel"], norm=record)
    else:
        raise SchemaError(f"unknown checkpoint kind {kind!r}")

    blob = weights_path.read_bytes()
    state = {}
    for entry in manifest["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=entry["offset"])
        state[entry["name"]] = torch.from_numpy(arr.reshape(shape).copy())

    for comp_name, module in model.components().items():
        prefix = comp_name + "."
        comp_state = {
            name[len(prefix):]: tensor for name, tensor in state.items() if name.startswith(prefix)
        }
        module.load_state_dict(comp_state)

    model.history = manifest.get("history", {})
    model.epoch = int(manifest.get("epoch", 0))
    return model
