"""Deterministic generator for the shipped label-tree fixtures.

Run ``python -m hdc.fixtures.generate`` to rewrite the JSON files under
``hdc/fixtures/data/``. Output is a pure function of the constants below;
the test suite regenerates and compares against the committed files.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

from ..tree import LabelTree, load_tree

ADJECTIVES = [
    "common", "lesser", "greater", "northern", "southern", "eastern",
    "western", "dwarf", "giant", "crested", "spotted", "striped", "golden",
    "silver", "black", "white", "red", "blue", "mountain", "river", "desert",
    "arctic", "coastal", "island", "highland", "lowland", "painted", "masked",
    "horned", "banded",
]

# level-3 groups: (group label, leaf quota, base noun pool)
IMAGENET_GROUPS = {
    "animal": [
        ("mammal", 120, ["fox", "bear", "deer", "otter", "wolf", "hare",
                         "badger", "marten", "seal", "lynx", "boar", "vole",
                         "shrew", "ibex", "tapir", "sloth", "gibbon", "lemur"]),
        ("bird", 80, ["eagle", "vulture", "kite", "finch", "heron", "plover",
                      "owl", "swift", "grouse", "tern", "crane", "bunting",
                      "warbler", "shrike"]),
        ("reptile", 40, ["lizard", "snake", "gecko", "skink", "turtle",
                         "tortoise", "iguana", "viper"]),
        ("amphibian", 20, ["frog", "toad", "newt", "salamander"]),
        ("fish", 40, ["shark", "ray", "eel", "perch", "carp", "pike",
                      "goby", "bream"]),
        ("invertebrate", 60, ["beetle", "moth", "mantis", "weevil", "snail",
                              "crab", "prawn", "urchin", "anemone", "cicada",
                              "hornet", "dragonfly"]),
    ],
    "plant": [
        ("flowering plant", 40, ["orchid", "daisy", "thistle", "poppy",
                                 "lupine", "aster", "mallow", "sedge"]),
        ("tree", 40, ["oak", "maple", "alder", "willow", "cypress", "cedar",
                      "rowan", "linden"]),
        ("vine", 10, ["ivy", "hop", "bryony"]),
    ],
    "fungus": [
        ("mushroom", 18, ["bolete", "morel", "agaric", "russula"]),
        ("mold", 6, ["mildew", "rust fungus"]),
    ],
    "artifact": [
        ("vehicle", 90, ["sedan", "lorry", "tram", "sloop", "barge", "glider",
                         "scooter", "wagon", "trawler", "railcar", "dinghy",
                         "tractor", "omnibus", "carriage"]),
        ("instrument", 70, ["lute", "fiddle", "oboe", "drum", "zither",
                            "cornet", "bassoon", "chime", "gauge", "sextant",
                            "scales", "lens"]),
        ("container", 50, ["crate", "flask", "barrel", "satchel", "urn",
                           "hamper", "canister", "chest", "kettle", "pail"]),
        ("structure", 60, ["bridge", "silo", "gazebo", "lighthouse", "dam",
                           "archway", "turret", "pavilion", "pier", "kiln",
                           "windmill"]),
        ("clothing", 50, ["cloak", "jersey", "bonnet", "sandal", "tunic",
                          "mitten", "apron", "gaiter", "poncho", "kilt"]),
        ("appliance", 40, ["toaster", "lamp", "heater", "grinder", "churn",
                           "stove", "fan", "boiler"]),
        ("tool", 60, ["hammer", "chisel", "rasp", "awl", "plane", "clamp",
                      "trowel", "mallet", "auger", "spanner", "shears"]),
        ("furnishing", 40, ["settee", "bureau", "stool", "sideboard", "cot",
                            "wardrobe", "divan", "lectern"]),
    ],
    "natural object": [
        ("geological formation", 30, ["mesa", "fjord", "caldera", "dune",
                                      "scarp", "grotto"]),
        ("celestial body", 10, ["comet", "nebula", "moonlet"]),
    ],
    "substance": [
        ("food", 20, ["loaf", "curd", "broth", "relish", "porridge"]),
        ("material", 6, ["shale", "resin"]),
    ],
}

LIVING = {"animal", "plant", "fungus"}

IMAGENET_SEED = 20240501
TARGET_DEPTH = 7

SUBGROUP_RANKS = {3: "order", 4: "family", 5: "genus", 6: "tribe"}


class _Namer:
    """Unique leaf names; sibling-unique internal names."""

    def __init__(self, rng: random.Random, nouns: list[str]):
        self.rng = rng
        self.nouns = nouns
        self.used_leaves: set[str] = set()

    def leaf(self) -> str:
        for _ in range(10_000):
            name = f"{self.rng.choice(ADJECTIVES)} {self.rng.choice(self.nouns)}"
            if name not in self.used_leaves:
                self.used_leaves.add(name)
                return name
        raise RuntimeError("leaf name pool exhausted")

    def subgroup(self, depth: int, taken: set[str]) -> str:
        rank = SUBGROUP_RANKS[depth]
        for _ in range(10_000):
            noun = self.rng.choice(self.nouns)
            name = f"{noun} {rank}"
            if name not in taken:
                taken.add(name)
                return name
            name = f"{self.rng.choice(ADJECTIVES)} {noun} {rank}"
            if name not in taken:
                taken.add(name)
                return name
        raise RuntimeError("subgroup name pool exhausted")


def _expand(node: dict, depth: int, quota: int, namer: _Namer, rng: random.Random,
            force_deep: bool) -> None:
    """Attach ``quota`` leaves below ``node`` (which sits at ``depth``)."""
    if depth == TARGET_DEPTH - 1 or quota == 1:
        for _ in range(quota):
            node["children"].append({"label": namer.leaf(), "children": []})
        return

    k = min(quota, rng.randint(2, 4))
    # random composition of quota into k positive parts
    cuts = sorted(rng.sample(range(1, quota), k - 1)) if k > 1 else []
    parts = [b - a for a, b in zip([0] + cuts, cuts + [quota])]
    if force_deep:
        # make sure one branch can keep splitting all the way down
        need = TARGET_DEPTH - 1 - depth
        parts[0] = max(parts[0], need + 1)
        overflow = sum(parts) - quota
        for i in range(1, len(parts)):
            take = min(overflow, parts[i] - 1)
            parts[i] -= take
            overflow -= take
        parts = [p for p in parts if p > 0]

    taken: set[str] = set()
    for i, part in enumerate(parts):
        if part == 1:
            node["children"].append({"label": namer.leaf(), "children": []})
            continue
        child = {"label": namer.subgroup(depth, taken), "children": []}
        node["children"].append(child)
        _expand(child, depth + 1, part, namer, rng, force_deep and i == 0)


def _to_adjacency(root: dict) -> list[dict]:
    doc = []
    counter = [0]

    def walk(node):
        nid = counter[0]
        counter[0] += 1
        entry = {"id": nid, "label": node["label"], "children": []}
        doc.append(entry)
        for child in node["children"]:
            entry["children"].append(walk(child))
        return nid

    walk(root)
    return doc


def imagenet_style_doc() -> list[dict]:
    rng = random.Random(IMAGENET_SEED)
    root = {"label": "entity", "children": []}
    living = {"label": "living thing", "children": []}
    nonliving = {"label": "non-living thing", "children": []}
    root["children"] = [living, nonliving]
    forced = True  # exactly one forced-deep branch overall keeps depth = 7
    for domain_label, groups in IMAGENET_GROUPS.items():
        domain = {"label": domain_label, "children": []}
        (living if domain_label in LIVING else nonliving)["children"].append(domain)
        for group_label, quota, nouns in groups:
            group = {"label": group_label, "children": []}
            domain["children"].append(group)
            namer = _Namer(rng, nouns)
            _expand(group, 3, quota, namer, rng, force_deep=forced)
            forced = False
    return _to_adjacency(root)


CIFAR_SEED = 20240502

CIFAR_GROUPS = {
    "animals": [
        ("aquatic mammal", ["beaver", "dolphin", "otter", "seal", "whale"]),
        ("fish", ["carp", "flatfish", "ray", "shark", "trout"]),
        ("insect", ["bee", "beetle", "butterfly", "caterpillar", "roach"]),
        ("reptile", ["crocodile", "dinosaur", "lizard", "snake", "turtle"]),
        ("small mammal", ["hamster", "mouse", "rabbit", "shrew", "squirrel"]),
        ("large carnivore", ["bear", "leopard", "lion", "tiger", "wolf"]),
        ("large herbivore", ["camel", "cattle", "chimp", "elephant", "kangaroo"]),
        ("invertebrate", ["crab", "lobster", "snail", "spider", "worm"]),
    ],
    "plants": [
        ("flower", ["orchid", "poppy", "rose", "sunflower", "tulip"]),
        ("tree kind", ["maple", "oak", "palm", "pine", "willow"]),
        ("produce", ["apple", "mushroom", "orange", "pear", "pepper"]),
    ],
    "people and scenes": [
        ("person", ["baby", "boy", "girl", "man", "woman"]),
        ("outdoor scene", ["cloud", "forest", "mountain", "plain", "sea"]),
        ("built scene", ["bridge", "castle", "house", "road", "skyscraper"]),
    ],
    "things": [
        ("container", ["bottle", "bowl", "can", "cup", "plate"]),
        ("furniture", ["bed", "chair", "couch", "table", "wardrobe"]),
        ("appliance", ["clock", "keyboard", "lamp", "telephone", "television"]),
        ("vehicle", ["bicycle", "bus", "motorcycle", "pickup", "train"]),
        ("heavy vehicle", ["mower", "rocket", "streetcar", "tank", "tractor"]),
        ("outdoor object", ["lawn", "bench", "fence", "signpost", "well"]),
    ],
}


def cifar_style_doc() -> list[dict]:
    root = {"label": "everything", "children": []}
    for domain_label, groups in CIFAR_GROUPS.items():
        domain = {"label": domain_label, "children": []}
        root["children"].append(domain)
        for group_label, leaves in groups:
            group = {"label": group_label, "children": []}
            domain["children"].append(group)
            for leaf in leaves:
                group["children"].append({"label": leaf, "children": []})
    return _to_adjacency(root)


def generate_all(out_dir: Path | None = None) -> dict[str, LabelTree]:
    out_dir = out_dir or Path(__file__).parent / "data"
    out_dir.mkdir(parents=True, exist_ok=True)
    docs = {
        "imagenet1k_style.json": imagenet_style_doc(),
        "cifar100_style.json": cifar_style_doc(),
    }
    trees = {}
    for filename, doc in docs.items():
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
        tree = load_tree(text)  # validate before writing
        (out_dir / filename).write_text(text, encoding="utf-8")
        trees[filename] = tree
    return trees


if __name__ == "__main__":
    for filename, tree in generate_all().items():
        print(f"{filename}: {tree!r}")
