from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from .config import ConfigEncoder, SamplerConfig, VBConfig
from .errors import DataError, UsageError
from .priors import PriorSpec, prior_from_dict

MANIFEST_FILENAME = "manifest.json"

Backend = Literal["gibbs", "vb"]


@dataclass
class RunManifest:
    """Everything needed to rerun a CLI invocation; written next to its outputs."""

    command: str
    prior: Dict[str, Any]
    sampler: Dict[str, Any] = field(default_factory=dict)
    vb: Dict[str, Any] = field(default_factory=dict)
    backend: Backend = "gibbs"
    dataset: Optional[Dict[str, Any]] = None  # {"path": ..., "format": ...}
    synthetic: Optional[Dict[str, Any]] = None
    split_ratio: Optional[float] = None
    seed: int = 0
    output_dir: str = "."
    offset: bool = False
    clip: Optional[List[float]] = None
    created: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())

    def __post_init__(self):
        if self.backend not in ("gibbs", "vb"):
            raise UsageError(f"unknown backend {self.backend!r}")
        if self.split_ratio is not None and not 0 < self.split_ratio < 1:
            raise UsageError("split ratio must lie in (0, 1)")

    @property
    def path(self) -> Path:
        return Path(self.output_dir) / MANIFEST_FILENAME

    def prior_spec(self) -> PriorSpec:
        return prior_from_dict(self.prior)

    def sampler_config(self) -> SamplerConfig:
        return SamplerConfig.from_dict(self.sampler)

    def vb_config(self) -> VBConfig:
        return VBConfig.from_dict(self.vb)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def save(self) -> Path:
        out = self.path
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(self.to_dict(), indent=2, cls=ConfigEncoder))
        return out

    @classmethod
    def load(cls, location: Path) -> "RunManifest":
        """``location`` is a manifest file or the directory holding one."""
        location = Path(location)
        path = location / MANIFEST_FILENAME if location.is_dir() else location
        if not path.exists():
            raise DataError(f"manifest not found: {path}")
        try:
            data = json.loads(path.read_text())
        except ValueError as e:
            raise DataError(f"corrupted manifest {path}: {e}")
        try:
            return cls(**data)
        except TypeError as e:
            raise DataError(f"manifest {path} has unexpected fields: {e}")


__all__ = ["RunManifest", "MANIFEST_FILENAME"]
