"""Flat diffusion-classifier baseline: every class, full sample budget."""

from __future__ import annotations

import time
from dataclasses import dataclass

from .errors import ScorerFailure
from .estimator import Posterior, argmin_label, rank_labels, softmax_posterior
from .metrics import RunMetrics
from .scoring import (
    DEFAULT_T_MAX,
    DEFAULT_TEMPLATE,
    ImageRef,
    SampleSet,
    Scorer,
    ScoreRequest,
    build_sample_set,
    render_prompt,
)
from .tree import LabelTree


@dataclass(frozen=True)
class FlatConfig:
    m_final: int
    sample_seed: int = 0
    prompt_template: str = DEFAULT_TEMPLATE
    t_max: int = DEFAULT_T_MAX

    def __post_init__(self):
        if self.m_final < 1:
            raise ValueError("m_final must be >= 1")


@dataclass(frozen=True)
class FlatResult:
    prediction: str
    posterior: Posterior
    metrics: RunMetrics
    mean_errors: dict[str, float]

    def ranking(self) -> list[str]:
        return rank_labels(self.mean_errors)


def score_label_means(
    image: ImageRef,
    labels: list[str],
    scorer: Scorer,
    samples: SampleSet,
    template: str,
) -> dict[str, float]:
    """Mean error per label over one shared sample set.

    Labels are processed in sorted order so reductions are deterministic
    regardless of how callers parallelize above this level.
    """
    means: dict[str, float] = {}
    for label in sorted(labels):
        prompt = render_prompt(template, label)
        total = 0.0
        for sample in samples:
            try:
                total += scorer.score(ScoreRequest(image, prompt, sample))
            except Exception as exc:
                raise ScorerFailure(image.image_id, label, sample, exc) from exc
        means[label] = total / len(samples)
    return means


def classify_flat(
    tree: LabelTree, image: ImageRef, scorer: Scorer, config: FlatConfig
) -> FlatResult:
    """Score every leaf class on the same fixed sample set; pick the argmin.

    Costs exactly ``leaf_count * m_final`` noise-prediction calls.
    """
    started = time.perf_counter()
    samples = build_sample_set(config.sample_seed, config.m_final, config.t_max)
    means = score_label_means(
        image, list(tree.leaf_labels()), scorer, samples, config.prompt_template
    )
    metrics = RunMetrics(
        eps_calls_prune=0,
        eps_calls_final=tree.leaf_count * config.m_final,
        surviving_leaves=tree.leaf_count,
        wall_clock=time.perf_counter() - started,
    )
    return FlatResult(
        prediction=argmin_label(means),
        posterior=softmax_posterior(means),
        metrics=metrics,
        mean_errors=means,
    )
