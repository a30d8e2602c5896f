"""Shipped label-tree fixtures.

``imagenet1k-style`` is a synthetic taxonomy with the same shape as the
ImageNet-1K hierarchy used for benchmarking (depth 7, 1000 leaf classes,
traversal usually started at level 3); ``cifar100-style`` is a shallow
100-class tree. Both are generated deterministically by
``python -m hdc.fixtures.generate``; the JSON files under ``data/`` are
committed so loads never depend on the generator.
"""

from importlib import resources

from ..tree import LabelTree, load_tree

IMAGENET_STYLE = "imagenet1k-style"
CIFAR_STYLE = "cifar100-style"

_FILES = {
    IMAGENET_STYLE: "imagenet1k_style.json",
    CIFAR_STYLE: "cifar100_style.json",
}


def fixture_names() -> list[str]:
    return sorted(_FILES)


def load_fixture(name: str) -> LabelTree:
    try:
        filename = _FILES[name]
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; have {fixture_names()}") from None
    data = resources.files(__package__).joinpath("data", filename).read_bytes()
    return load_tree(data)
