"""Monte Carlo error aggregation and posteriors over candidate labels.

Pure functions over immutable inputs; the only stateful piece is the
per-node accumulator owned by a single traversal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .tree import NodeId


@dataclass
class NodeErrorAccumulator:
    """Collects per-sample errors for one node, then freezes.

    ``finalized`` marks the node's error as already calculated, so later
    traversal depths reuse the mean instead of re-scoring.
    """

    node: NodeId
    sample_errors: list[float] = field(default_factory=list)
    finalized: bool = False

    def append(self, error: float) -> None:
        if self.finalized:
            raise ValueError(f"accumulator for node {self.node} is finalized")
        self.sample_errors.append(error)

    def finalize(self) -> None:
        self.finalized = True


def mc_mean(acc: NodeErrorAccumulator) -> float:
    """Arithmetic mean of the accumulated sample errors."""
    if not acc.sample_errors:
        raise ValueError(f"accumulator for node {acc.node} is empty")
    return math.fsum(acc.sample_errors) / len(acc.sample_errors)


@dataclass(frozen=True)
class Posterior:
    """Probabilities over leaf labels; entries sum to 1 within 1e-9."""

    entries: dict[str, float]

    def __post_init__(self):
        if not self.entries:
            raise ValueError("posterior must be non-empty")
        total = math.fsum(self.entries.values())
        if not math.isclose(total, 1.0, abs_tol=1e-9):
            raise ValueError(f"posterior sums to {total}, not 1")
        for label, p in self.entries.items():
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability {p} for {label!r} outside [0, 1]")

    def __getitem__(self, label: str) -> float:
        return self.entries[label]

    def top_label(self) -> str:
        return min(self.entries, key=lambda l: (-self.entries[l], l))


def softmax_posterior(mean_errors: Mapping[str, float]) -> Posterior:
    """exp(-mean error), normalized, with a max shift for stability."""
    _check_finite(mean_errors)
    lowest = min(mean_errors.values())
    weights = {label: math.exp(lowest - e) for label, e in mean_errors.items()}
    total = math.fsum(weights.values())
    return Posterior({label: w / total for label, w in weights.items()})


def paired_posterior(
    sample_errors: Mapping[str, Sequence[float]], anchor: str
) -> Posterior:
    """Posterior from per-sample error differences against every label.

    ``p(c_i) = 1 / sum_j exp(mean_k [d_i(k) - d_j(k)])``, computed on a
    shared sample set. Algebraically identical to ``softmax_posterior`` of
    the per-label means; exposed for probability reports that want the
    ranking-style form. ``anchor`` names the caller's reference label and
    must be present (the result does not depend on the choice).
    """
    if not sample_errors:
        raise ValueError("sample_errors must be non-empty")
    if anchor not in sample_errors:
        raise ValueError(f"anchor {anchor!r} not among the labels")
    lengths = {len(v) for v in sample_errors.values()}
    if len(lengths) != 1:
        raise ValueError("all labels must share the same sample list length")
    (m,) = lengths
    if m < 1:
        raise ValueError("sample lists must be non-empty")
    for label, errs in sample_errors.items():
        _check_finite({f"{label}[{i}]": e for i, e in enumerate(errs)})

    entries = {}
    for li, ei in sample_errors.items():
        denom = 0.0
        for lj, ej in sample_errors.items():
            mean_delta = math.fsum(a - b for a, b in zip(ei, ej)) / m
            denom += math.exp(min(mean_delta, 700.0))  # cap: exp overflow -> p ~ 0 anyway
        entries[li] = 1.0 / denom
    # Re-normalize away the last float crumbs so the Posterior invariant holds.
    total = math.fsum(entries.values())
    return Posterior({label: p / total for label, p in entries.items()})


def argmin_label(mean_errors: Mapping[str, float]) -> str:
    """Label with the smallest mean error; ties go to the smallest label."""
    _check_finite(mean_errors)
    return min(mean_errors, key=lambda label: (mean_errors[label], label))


def rank_labels(mean_errors: Mapping[str, float]) -> list[str]:
    """Labels by ascending mean error, ties by label (the argmin rule)."""
    _check_finite(mean_errors)
    return sorted(mean_errors, key=lambda label: (mean_errors[label], label))


def _check_finite(mean_errors: Mapping[str, float]) -> None:
    if not mean_errors:
        raise ValueError("mean_errors must be non-empty")
    for label, e in mean_errors.items():
        if not math.isfinite(e):
            raise ValueError(f"non-finite error {e} for {label!r}")
