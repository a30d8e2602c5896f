import pytest

from hdc.scoring import ImageRef, SyntheticScorer, SyntheticScorerConfig
from hdc.tree import tree_from_nested


@pytest.fixture
def mini_tree():
    """Depth 2, four classes under two synsets."""
    return tree_from_nested(
        {"entity": {"animal": {"dog": None, "cat": None},
                    "tool": {"hammer": None, "saw": None}}}
    )


@pytest.fixture
def imbalanced_tree():
    """Root with one direct leaf and one internal child (classes at
    different depths)."""
    return tree_from_nested(
        {"root": {"moss": None, "animal": {"dog": None, "cat": None}}}
    )


@pytest.fixture
def chain_tree():
    return tree_from_nested({"root": {"a": {"b": {"leaf": None}}}})


def balanced_tree(branching=3, depth=3, prefix="n"):
    """Perfect ``branching``-ary tree of the given depth."""

    def sub(name, level):
        if level == depth:
            return None
        return {f"{name}.{i}": sub(f"{name}.{i}", level + 1) for i in range(branching)}

    return tree_from_nested({prefix: sub(prefix, 0)})


@pytest.fixture
def tree27():
    """3 levels, 27 leaf classes."""
    return balanced_tree(branching=3, depth=3)


def make_synthetic(tree, noise_sigma=0.0, seed=0, base_error=0.1, distance_gain=0.05,
                   schedule="linear"):
    return SyntheticScorer(
        SyntheticScorerConfig(
            tree=tree,
            base_error=base_error,
            distance_gain=distance_gain,
            noise_sigma=noise_sigma,
            alpha_bar_schedule=schedule,
            seed=seed,
        )
    )


def image_of(label, idx=0):
    return ImageRef(image_id=f"{label}#{idx}", true_class=label)
