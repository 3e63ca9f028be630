"""Run manifests: every command writes one next to its outputs so a run can be
reproduced bit-identically (manifest timestamp aside) from inputs + flags + seed."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return f"sha256:{h.hexdigest()}"


@dataclass
class RunManifest:
    command: str
    version: str
    parameters: dict
    inputs: dict
    seed: int | None
    outputs: list[str]
    created: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())

    def write(self, path: str | Path) -> None:
        payload = {
            "command": self.command,
            "version": self.version,
            "parameters": self.parameters,
            "inputs": self.inputs,
            "seed": self.seed,
            "outputs": self.outputs,
            "created": self.created,
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def build_manifest(
    command: str, version: str, parameters: dict, input_paths: dict, seed: int | None, outputs: list
) -> RunManifest:
    return RunManifest(
        command=command,
        version=version,
        parameters=parameters,
        inputs={name: file_digest(p) for name, p in input_paths.items()},
        seed=seed,
        outputs=[str(p) for p in outputs],
    )
