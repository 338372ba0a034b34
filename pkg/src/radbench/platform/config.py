from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from ..cohort import DEFAULT_K
from ..strata import DEFAULT_N_MIN, EvalConfig
from ..taxonomy import AgeBinning, LocationTaxonomy, decade_binning, default_taxonomy


@dataclass
class PlatformConfig:
    data_dir: Path = Path("radbench-data")
    n_min: int = DEFAULT_N_MIN
    k: int = DEFAULT_K
    age_bins: Optional[list] = None  # [[lo, hi|null, label], ...]
    taxonomy_path: Optional[Path] = None
    host: str = "127.0.0.1"
    port: int = 8080
    operator_token: Optional[str] = None
    min_radiologists: int = 1
    snapshot_every: int = 500
    public_leaderboard: bool = True
    intersection_metric: str = "auc"
    workers: int = 1
    _taxonomy: Optional[LocationTaxonomy] = field(default=None, repr=False, compare=False)

    def age_binning(self) -> AgeBinning:
        return AgeBinning.from_rows(self.age_bins) if self.age_bins else decade_binning()

    def taxonomy(self) -> LocationTaxonomy:
        if self._taxonomy is None:
            self._taxonomy = LocationTaxonomy.load(self.taxonomy_path) if self.taxonomy_path else default_taxonomy()
        return self._taxonomy

    def eval_config(self) -> EvalConfig:
        return EvalConfig(
            n_min=self.n_min,
            age_binning=self.age_binning(),
            intersection_metric=self.intersection_metric,
            min_radiologists=self.min_radiologists,
            workers=self.workers,
        )


_KNOWN = {
    "data_dir", "n_min", "k", "age_bins", "taxonomy_path", "host", "port", "operator_token",
    "min_radiologists", "snapshot_every", "public_leaderboard", "intersection_metric", "workers",
}


def load_config(path: str | Path | None = None, **overrides) -> PlatformConfig:
    """Read a YAML config file; ``listen: host:port`` is accepted as a shorthand."""
    raw: dict = {}
    if path is not None:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    if "listen" in raw:
        host, _, port = str(raw.pop("listen")).rpartition(":")
        raw.setdefault("host", host or "127.0.0.1")
        raw.setdefault("port", int(port))
    unknown = set(raw) - _KNOWN
    if unknown:
        raise ValueError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    raw.update({k: v for k, v in overrides.items() if v is not None})
    if "data_dir" in raw:
        raw["data_dir"] = Path(raw["data_dir"])
    if raw.get("taxonomy_path"):
        raw["taxonomy_path"] = Path(raw["taxonomy_path"])
    cfg = PlatformConfig(**raw)
    cfg.age_binning()  # validate early
    cfg.eval_config()
    return cfg
