"""FastAPI service wrapping the classifier engine.

The service is stateless: every request carries its tree/dataset/scorer
inline, so the process can be shared by many clients and never touches
the caller's filesystem. The CLI is a thin client of these endpoints.
"""

from __future__ import annotations

import time

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import (
    ConfigError,
    DatasetMismatchError,
    HdcError,
    TreeError,
)
from ..harness import (
    compare_reports,
    comparison_table,
    confusion_subtrees_for,
    dataset_hash,
    dataset_to_doc,
    make_synthetic_dataset,
    run_experiment,
    spec_from_payload,
)
from ..scoring import PROTOCOL_VERSION, GreedyProbe
from ..tree import LabelTree, insert_class, limit_depth, load_tree, remove_class
from ..harness import build_scorer
from .models import (
    CompareRequest,
    CompareResponse,
    DatasetResponse,
    GenDatasetRequest,
    HealthResponse,
    InsertRequest,
    LimitDepthRequest,
    RemoveRequest,
    RunRequest,
    RunResponse,
    TreeNodeModel,
    TreeResponse,
    TreeSource,
    TreeStatsModel,
    ValidateResponse,
)


def _tree_from_source(source: TreeSource) -> LabelTree:
    import json

    if source.tree is not None:
        doc = [node.model_dump() for node in source.tree]
        return load_tree(json.dumps(doc))
    if source.tree_text is not None:
        return load_tree(source.tree_text, source.format)
    raise ConfigError("request carries neither tree nor tree_text")


def _stats(tree: LabelTree) -> TreeStatsModel:
    return TreeStatsModel(
        depth=tree.depth,
        node_count=len(tree),
        leaf_count=tree.leaf_count,
        root_label=tree.node(tree.root).label,
        branching={str(k): v for k, v in tree.branching_histogram().items()},
    )


def _tree_response(tree: LabelTree) -> TreeResponse:
    return TreeResponse(
        tree=[TreeNodeModel(**entry) for entry in tree.to_adjacency()],
        stats=_stats(tree),
    )


def create_app() -> FastAPI:
    app = FastAPI(
        title="hdc",
        version=__version__,
        description="Hierarchical diffusion classifier engine",
    )

    @app.exception_handler(HdcError)
    async def hdc_error_handler(request: Request, exc: HdcError):
        if isinstance(exc, ConfigError):
            status = 400
        elif isinstance(exc, DatasetMismatchError):
            status = 409
        else:
            status = 422
        return JSONResponse(
            status_code=status,
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.exception_handler(ValueError)
    async def value_error_handler(request: Request, exc: ValueError):
        return JSONResponse(
            status_code=400,
            content={"error": "ValueError", "detail": str(exc)},
        )

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(
            status="ok", version=__version__, protocol=PROTOCOL_VERSION
        )

    @app.post("/tree/validate", response_model=ValidateResponse)
    def tree_validate(req: TreeSource):
        try:
            tree = _tree_from_source(req)
        except TreeError as exc:
            return ValidateResponse(valid=False, error=f"{type(exc).__name__}: {exc}")
        return ValidateResponse(valid=True, stats=_stats(tree))

    @app.post("/tree/stats", response_model=TreeStatsModel)
    def tree_stats(req: TreeSource):
        return _stats(_tree_from_source(req))

    @app.post("/tree/limit-depth", response_model=TreeResponse)
    def tree_limit_depth(req: LimitDepthRequest):
        return _tree_response(limit_depth(_tree_from_source(req), req.max_depth))

    @app.post("/tree/insert", response_model=TreeResponse)
    def tree_insert(req: InsertRequest):
        tree = _tree_from_source(req)
        probe = None
        if req.mode == "greedy":
            if req.probe is None:
                raise ConfigError("greedy insertion requires a probe")
            from ..scoring import ImageRef

            probe = GreedyProbe(
                scorer=build_scorer(req.probe.scorer.to_spec(), tree),
                images=[
                    ImageRef(image_id=i.image_id, true_class=i.true_class)
                    for i in req.probe.images
                ],
                samples_per_node=req.probe.samples_per_node,
                seed=req.probe.seed,
                template=req.probe.template,
            )
        return _tree_response(insert_class(tree, req.label, req.mode, probe))

    @app.post("/tree/remove", response_model=TreeResponse)
    def tree_remove(req: RemoveRequest):
        return _tree_response(remove_class(_tree_from_source(req), req.label))

    @app.post("/datasets/synthetic", response_model=DatasetResponse)
    def gen_dataset(req: GenDatasetRequest):
        tree = _tree_from_source(req)
        images = make_synthetic_dataset(tree, req.per_class, req.seed)
        doc = dataset_to_doc(
            images,
            {"kind": "synthetic", "per_class": req.per_class, "seed": req.seed},
        )
        return DatasetResponse(
            dataset=doc, dataset_hash=dataset_hash(images), n_images=len(images)
        )

    @app.post("/runs", response_model=RunResponse)
    def run(req: RunRequest):
        payload = {
            "tree": [node.model_dump() for node in req.tree],
            "method": req.method,
            "scorer": req.scorer.to_spec(),
            "dataset": req.dataset,
            "flat": req.flat,
            "hdc": req.hdc,
            "workers": req.workers,
            "confusion_synsets": req.confusion_synsets,
        }
        spec = spec_from_payload(payload)
        started = time.perf_counter()
        report, traces = run_experiment(spec)
        elapsed = time.perf_counter() - started
        return RunResponse(
            report=report.to_dict(),
            traces=traces if req.with_traces else {},
            confusion_subtrees=confusion_subtrees_for(spec, report),
            elapsed_seconds=elapsed,
        )

    @app.post("/compare", response_model=CompareResponse)
    def compare(req: CompareRequest):
        comparison = compare_reports(req.baseline, req.method)
        return CompareResponse(comparison=comparison, table=comparison_table(comparison))

    return app


app = create_app()
