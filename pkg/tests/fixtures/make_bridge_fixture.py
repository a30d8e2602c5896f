"""Regenerate the shared replay fixture used by the bridge conformance test.

Records every scorer call an HDC run makes on a small tree for two
images, freezes those values into a 200-entry matrix (padded with unused
entries for a reserved image id), and writes the tree alongside. Run as
``python3 tests/fixtures/make_bridge_fixture.py``; output is committed.
"""

import json
from pathlib import Path

from hdc.hierarchical import HdcConfig, PruneStrategy, classify_hdc
from hdc.scoring import ImageRef, SyntheticScorer, SyntheticScorerConfig, write_replay_matrix
from hdc.tree import tree_from_nested, write_tree

HERE = Path(__file__).parent

TREE_SPEC = {
    "root": {
        "animal": {
            "bird": {"eagle": None, "vulture": None, "kite": None},
            "mammal": {"fox": None, "otter": None, "hare": None},
        },
        "artifact": {
            "tool": {"hammer": None, "rasp": None, "awl": None},
            "vessel": {"flask": None, "urn": None, "pail": None},
        },
        "plant": {
            "tree kind": {"oak": None, "alder": None, "rowan": None},
            "flower": {"poppy": None, "aster": None, "mallow": None},
        },
    }
}

IMAGES = [
    ImageRef("kite#0", true_class="kite"),
    ImageRef("urn#0", true_class="urn"),
]

HDC_CONFIG = HdcConfig(
    m_final=8,
    m_prune=3,
    start_level=1,
    sample_seed=31,
    strategy=PruneStrategy.fixed(0.5),
)

TARGET_ENTRIES = 200


class Recording:
    def __init__(self, inner):
        self.inner = inner
        self.entries = {}

    def score(self, request):
        value = self.inner.score(request)
        key = (
            request.image.image_id,
            request.prompt.label,
            request.sample.t,
            request.sample.noise_id,
        )
        self.entries[key] = value
        return value


def main():
    tree = tree_from_nested(TREE_SPEC)
    scorer = Recording(
        SyntheticScorer(
            SyntheticScorerConfig(tree=tree, noise_sigma=0.25, seed=77)
        )
    )
    for image in IMAGES:
        classify_hdc(tree, image, scorer, HDC_CONFIG)

    entries = dict(scorer.entries)
    used = len(entries)
    pad = TARGET_ENTRIES - used
    if pad < 0:
        raise SystemExit(f"run used {used} entries, more than the {TARGET_ENTRIES} target")
    for i in range(pad):
        entries[("pad#0", "eagle", 1 + i, 10_000 + i)] = round(0.5 + i / 1000, 6)

    write_tree(tree, HERE / "bridge_tree.json")
    write_replay_matrix(entries, HERE / "replay_matrix_200.json")
    print(f"wrote replay_matrix_200.json: {used} used + {pad} padding = {len(entries)}")


if __name__ == "__main__":
    main()
