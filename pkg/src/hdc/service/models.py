"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class TreeNodeModel(BaseModel):
    id: int
    label: str
    children: list[int] = Field(default_factory=list)


class TreeSource(BaseModel):
    """A tree shipped inline: parsed adjacency or raw text plus format."""

    tree: Optional[list[TreeNodeModel]] = None
    tree_text: Optional[str] = None
    format: str = "json-adjacency"


class TreeStatsModel(BaseModel):
    depth: int
    node_count: int
    leaf_count: int
    root_label: str
    branching: dict[str, int]


class ValidateResponse(BaseModel):
    valid: bool
    error: Optional[str] = None
    stats: Optional[TreeStatsModel] = None


class TreeResponse(BaseModel):
    tree: list[TreeNodeModel]
    stats: TreeStatsModel


class LimitDepthRequest(TreeSource):
    max_depth: int


class ImageModel(BaseModel):
    image_id: str
    true_class: Optional[str] = None


class ScorerModel(BaseModel):
    kind: Literal["synthetic", "replay", "remote"]
    # synthetic
    base_error: float = 0.1
    distance_gain: float = 0.05
    noise_sigma: float = 0.0
    alpha_bar_schedule: str = "linear"
    seed: int = 0
    t_max: int = 1000
    # replay
    rows: Optional[list[dict]] = None
    # remote
    endpoint: Optional[str] = None

    def to_spec(self) -> dict:
        if self.kind == "synthetic":
            return {
                "kind": "synthetic",
                "base_error": self.base_error,
                "distance_gain": self.distance_gain,
                "noise_sigma": self.noise_sigma,
                "alpha_bar_schedule": self.alpha_bar_schedule,
                "seed": self.seed,
                "t_max": self.t_max,
            }
        if self.kind == "replay":
            return {"kind": "replay", "rows": self.rows or []}
        return {"kind": "remote", "endpoint": self.endpoint}


class ProbeModel(BaseModel):
    scorer: ScorerModel
    images: list[ImageModel]
    samples_per_node: int = 4
    seed: int = 0
    template: str = "A photo of a {label}"


class InsertRequest(TreeSource):
    label: str
    mode: Literal["under-root", "greedy"] = "under-root"
    probe: Optional[ProbeModel] = None


class RemoveRequest(TreeSource):
    label: str


class GenDatasetRequest(TreeSource):
    per_class: int = 1
    seed: int = 0


class DatasetResponse(BaseModel):
    dataset: dict
    dataset_hash: str
    n_images: int


class RunRequest(BaseModel):
    tree: list[TreeNodeModel]
    method: Literal["flat", "hdc"]
    scorer: ScorerModel
    dataset: dict
    flat: Optional[dict] = None
    hdc: Optional[dict] = None
    workers: Optional[int] = None
    confusion_synsets: list[str] = Field(default_factory=list)
    with_traces: bool = True


class RunResponse(BaseModel):
    report: dict
    traces: dict[str, dict]
    confusion_subtrees: dict[str, dict]
    elapsed_seconds: float


class CompareRequest(BaseModel):
    baseline: dict
    method: dict


class CompareResponse(BaseModel):
    comparison: dict
    table: str


class HealthResponse(BaseModel):
    status: str
    version: str
    protocol: str
