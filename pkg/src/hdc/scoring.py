"""Scorers: oracles for the noise-prediction error of (image, label, sample).

The engine never touches pixels or noise tensors. A sample is a
``(timestep, noise_id)`` pair; whatever model-side noising and
``l2``-distance computation produces the error happens behind the
``Scorer`` protocol. Three implementations ship:

* :class:`SyntheticScorer`: a deterministic generative stand-in whose
  noiseless error grows with tree distance from the true class. Test
  instrument, not a model.
* :class:`ReplayScorer`: exact lookups in a precomputed error matrix.
* :class:`RemoteScorer`: newline-delimited JSON client for an external
  scorer process (see the wire protocol notes in the README).
"""

from __future__ import annotations

import hashlib
import json
import math
import shlex
import socket
import subprocess
import threading
from dataclasses import dataclass, field
from typing import IO, Iterable, Protocol, Sequence

import numpy as np

from .errors import (
    PromptError,
    RemoteScorerError,
    ReplayKeyError,
    ScorerError,
    TreeParseError,
)
from .tree import LabelTree, NodeId

DEFAULT_TEMPLATE = "A photo of a {label}"
DEFAULT_T_MAX = 1000

PROTOCOL_VERSION = "hdc-scorer/1"

# Noise ids stay below 2**53 so they survive a round trip through any
# JSON parser that stores numbers as IEEE doubles.
NOISE_ID_BOUND = 2**53


@dataclass(frozen=True)
class ImageRef:
    """An input image by reference; payload bytes only matter to remote scorers."""

    image_id: str
    true_class: str | None = None
    payload: bytes | None = None

    def __post_init__(self):
        if not self.image_id:
            raise ValueError("image_id must be non-empty")


@dataclass(frozen=True)
class SamplePoint:
    """One Monte Carlo draw: a timestep and the seed naming its noise."""

    t: int
    noise_id: int

    def __post_init__(self):
        if self.t < 1:
            raise ValueError(f"timestep {self.t} out of range")


@dataclass(frozen=True)
class SampleSet:
    """A fixed, shared list of sample points, reproducible from its seed."""

    samples: tuple[SamplePoint, ...]
    seed: int
    t_max: int = DEFAULT_T_MAX

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)


def build_sample_set(seed: int, m: int, t_max: int = DEFAULT_T_MAX) -> SampleSet:
    """Draw ``m`` (t, noise_id) pairs, t uniform over [1, t_max], from ``seed``."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    rng = np.random.default_rng(seed)
    ts = rng.integers(1, t_max + 1, size=m)
    noise_ids = rng.integers(0, NOISE_ID_BOUND, size=m)
    samples = tuple(
        SamplePoint(t=int(t), noise_id=int(n)) for t, n in zip(ts, noise_ids)
    )
    return SampleSet(samples=samples, seed=seed, t_max=t_max)


def derive_seed(seed: int, *tags) -> int:
    """Stable 64-bit sub-seed for a tagged stream (e.g. one pruning depth)."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(seed).encode())
    for tag in tags:
        h.update(b"|")
        h.update(str(tag).encode())
    return int.from_bytes(h.digest(), "big")


@dataclass(frozen=True)
class Prompt:
    template: str
    label: str
    rendered: str


def render_prompt(template: str, label: str) -> Prompt:
    """Substitute the label into a single-placeholder template.

    Any ``{...}`` field counts as the placeholder; there must be exactly
    one.
    """
    open_i = template.find("{")
    close_i = template.find("}", open_i + 1)
    if open_i < 0 or close_i < 0:
        raise PromptError(f"template {template!r} has no placeholder")
    rest = template[close_i + 1 :]
    if "{" in rest or "}" in rest or "}" in template[:open_i]:
        raise PromptError(f"template {template!r} has more than one placeholder")
    rendered = template[:open_i] + label + template[close_i + 1 :]
    return Prompt(template=template, label=label, rendered=rendered)


@dataclass(frozen=True)
class ScoreRequest:
    image: ImageRef
    prompt: Prompt
    sample: SamplePoint


class Scorer(Protocol):
    """Anything that turns a ScoreRequest into a nonnegative error."""

    def score(self, request: ScoreRequest) -> float: ...


# -- synthetic scorer --------------------------------------------------------


@dataclass
class SyntheticScorerConfig:
    """Deterministic generative stand-in over a reference tree.

    Noiseless error for a candidate leaf is ``base_error +
    distance_gain * tree_distance(true leaf, candidate)``; internal-node
    prompts behave like their best-matching descendant class. Noise is
    seeded Gaussian scaled by ``noise_sigma * sqrt(1 - alpha_bar(t))``, so
    low timesteps are nearly clean.
    """

    tree: LabelTree
    base_error: float = 0.1
    distance_gain: float = 0.05
    noise_sigma: float = 0.0
    alpha_bar_schedule: str = "linear"  # linear | constant
    seed: int = 0
    t_max: int = DEFAULT_T_MAX

    def __post_init__(self):
        if self.base_error < 0:
            raise ValueError("base_error must be >= 0")
        if self.distance_gain <= 0:
            raise ValueError("distance_gain must be > 0")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.alpha_bar_schedule not in ("linear", "constant"):
            raise ValueError(f"unknown alpha_bar schedule {self.alpha_bar_schedule!r}")

    def alpha_bar(self, t: int) -> float:
        if self.alpha_bar_schedule == "constant":
            return 0.5
        return 1.0 - t / (self.t_max + 1)


def synthetic_error_mean(
    config: SyntheticScorerConfig, image: ImageRef, node: NodeId
) -> float:
    """Noiseless target error of the synthetic model for one tree node.

    For a leaf: base plus gain times tree distance from the image's true
    class. For an internal node: the minimum of that over its descendant
    leaves, i.e. the subtree's best match.
    """
    tree = config.tree
    if image.true_class is None:
        raise ScorerError(f"image {image.image_id!r} has no true_class")
    true_leaf = tree.leaf_by_label(image.true_class)
    n = tree.node(node)
    if n.is_leaf:
        dist = tree.distance(true_leaf, node)
    elif tree.is_ancestor_or_self(node, true_leaf):
        dist = 0
    else:
        # Nearest descendant leaf lies straight below: distance to the
        # node plus its minimum leaf height.
        dist = tree.distance(true_leaf, node) + tree.min_leaf_height(node)
    return config.base_error + config.distance_gain * dist


def _unit_gaussian(parts: Iterable) -> float:
    """Standard normal from a counter-style hash of the key parts.

    Order-independent across calls by construction: the value depends only
    on the key, never on call history.
    """
    h = hashlib.blake2b(digest_size=16)
    for part in parts:
        b = str(part).encode()
        h.update(len(b).to_bytes(2, "big"))
        h.update(b)
    digest = h.digest()
    a = int.from_bytes(digest[:8], "big")
    b = int.from_bytes(digest[8:], "big")
    u1 = (a + 1) / 2.0**64  # in (0, 1]
    u2 = b / 2.0**64
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


class SyntheticScorer:
    """Deterministic, thread-safe scorer over a SyntheticScorerConfig."""

    def __init__(self, config: SyntheticScorerConfig):
        self.config = config
        self._mean_cache: dict[tuple[str, str], float] = {}

    def score(self, request: ScoreRequest) -> float:
        mean = self.mean_for_label(request.image, request.prompt.label)
        cfg = self.config
        if cfg.noise_sigma == 0.0:
            return mean
        scale = cfg.noise_sigma * math.sqrt(1.0 - cfg.alpha_bar(request.sample.t))
        z = _unit_gaussian(
            (
                cfg.seed,
                request.image.image_id,
                request.prompt.label,
                request.sample.t,
                request.sample.noise_id,
            )
        )
        return max(0.0, mean + scale * z)

    def mean_for_label(self, image: ImageRef, label: str) -> float:
        """Noiseless error for a prompt label; unknown labels score like a
        class beyond the farthest leaf (prompts are just text)."""
        if image.true_class is None:
            raise ScorerError(f"image {image.image_id!r} has no true_class")
        key = (image.true_class, label)
        cached = self._mean_cache.get(key)
        if cached is not None:
            return cached
        cfg = self.config
        nodes = cfg.tree.nodes_by_label(label)
        if nodes:
            mean = min(synthetic_error_mean(cfg, image, n) for n in nodes)
        else:
            mean = cfg.base_error + cfg.distance_gain * (2 * cfg.tree.depth + 1)
        self._mean_cache[key] = mean
        return mean


# -- replay scorer -----------------------------------------------------------


def _matrix_key(image_id: str, label: str, t: int, noise_id: int) -> tuple:
    return (image_id, label, int(t), int(noise_id))


class ReplayScorer:
    """Scores straight out of a precomputed (image, label, t, noise) matrix."""

    def __init__(self, entries: dict[tuple, float]):
        self.entries = entries

    @classmethod
    def from_rows(cls, rows: Iterable[dict]) -> "ReplayScorer":
        entries = {}
        for row in rows:
            entries[
                _matrix_key(row["image_id"], row["label"], row["t"], row["noise_id"])
            ] = float(row["error"])
        return cls(entries)

    @classmethod
    def from_file(cls, path) -> "ReplayScorer":
        path = str(path)
        with open(path, "r", encoding="utf-8") as fh:
            if path.endswith(".csv"):
                import csv

                return cls.from_rows(csv.DictReader(fh))
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise TreeParseError(f"invalid replay matrix JSON: {exc}") from exc
        rows = doc["rows"] if isinstance(doc, dict) else doc
        return cls.from_rows(rows)

    def score(self, request: ScoreRequest) -> float:
        key = _matrix_key(
            request.image.image_id,
            request.prompt.label,
            request.sample.t,
            request.sample.noise_id,
        )
        try:
            return self.entries[key]
        except KeyError:
            raise ReplayKeyError(
                f"no replay entry for image={key[0]!r} label={key[1]!r} "
                f"t={key[2]} noise_id={key[3]}"
            ) from None


def write_replay_matrix(entries: dict[tuple, float], path) -> None:
    rows = [
        {"image_id": k[0], "label": k[1], "t": k[2], "noise_id": k[3], "error": v}
        for k, v in sorted(entries.items())
    ]
    with open(str(path), "w", encoding="utf-8") as fh:
        json.dump(rows, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- remote scorer -----------------------------------------------------------


class RemoteScorer:
    """Client half of the newline-delimited JSON scorer protocol.

    One request in flight at a time (calls are serialized on a lock); the
    server answers in arrival order. Endpoints: ``tcp://host:port`` to
    connect, or ``stdio:<command>`` to spawn the server as a child process.
    """

    def __init__(self, reader: IO[str], writer: IO[str], owner=None):
        self._reader = reader
        self._writer = writer
        self._owner = owner  # socket or Popen kept alive / closed with us
        self._lock = threading.Lock()
        self._next_id = 0
        handshake = self._reader.readline()
        if PROTOCOL_VERSION not in handshake:
            raise RemoteScorerError(
                f"bad handshake from scorer server: {handshake!r}"
            )

    @classmethod
    def from_endpoint(cls, endpoint: str, timeout: float = 30.0) -> "RemoteScorer":
        if endpoint.startswith("tcp://"):
            host, _, port = endpoint[len("tcp://") :].partition(":")
            if not port:
                raise RemoteScorerError(f"endpoint {endpoint!r} needs a port")
            return cls.connect_tcp(host, int(port), timeout=timeout)
        if endpoint.startswith("stdio:"):
            return cls.spawn(endpoint[len("stdio:") :])
        raise RemoteScorerError(f"unsupported scorer endpoint {endpoint!r}")

    @classmethod
    def connect_tcp(cls, host: str, port: int, timeout: float = 30.0) -> "RemoteScorer":
        try:
            sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise RemoteScorerError(f"cannot connect to {host}:{port}: {exc}") from exc
        fh = sock.makefile("rw", encoding="utf-8", newline="\n")
        return cls(fh, fh, owner=sock)

    @classmethod
    def spawn(cls, command: str) -> "RemoteScorer":
        proc = subprocess.Popen(
            shlex.split(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        return cls(proc.stdout, proc.stdin, owner=proc)

    def score(self, request: ScoreRequest) -> float:
        with self._lock:
            self._next_id += 1
            rid = self._next_id
            msg = {
                "id": rid,
                "image_id": request.image.image_id,
                "prompt": request.prompt.rendered,
                "t": request.sample.t,
                "noise_id": request.sample.noise_id,
            }
            if request.image.payload is not None:
                import base64

                msg["payload_b64"] = base64.b64encode(request.image.payload).decode()
            try:
                self._writer.write(json.dumps(msg) + "\n")
                self._writer.flush()
                line = self._reader.readline()
            except OSError as exc:
                raise RemoteScorerError(f"transport failure: {exc}") from exc
            if not line:
                raise RemoteScorerError("scorer server closed the connection")
            try:
                reply = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RemoteScorerError(f"unparseable reply {line!r}") from exc
            if reply.get("id") != rid:
                raise RemoteScorerError(
                    f"reply id {reply.get('id')} does not match request id {rid}"
                )
            if "fault" in reply:
                raise RemoteScorerError(f"server fault: {reply['fault']}")
            error = reply.get("error")
            if not isinstance(error, (int, float)) or not math.isfinite(error) or error < 0:
                raise RemoteScorerError(f"invalid error value in reply: {line!r}")
            return float(error)

    def close(self) -> None:
        for target in (self._writer, self._reader):
            try:
                target.close()
            except Exception:
                pass
        if isinstance(self._owner, subprocess.Popen):
            self._owner.terminate()
            self._owner.wait(timeout=10)
        elif self._owner is not None:
            try:
                self._owner.close()
            except Exception:
                pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


# -- greedy-insertion probe ---------------------------------------------------


@dataclass
class GreedyProbe:
    """Mean scorer error per candidate label over a probe image set.

    Backs greedy class insertion: every candidate synset label is scored
    on the same probe images and the same fixed sample set.
    """

    scorer: Scorer
    images: Sequence[ImageRef]
    samples_per_node: int
    seed: int = 0
    t_max: int = DEFAULT_T_MAX
    template: str = DEFAULT_TEMPLATE
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.images:
            raise ValueError("probe needs at least one image")
        if self.samples_per_node < 1:
            raise ValueError("samples_per_node must be >= 1")
        self._samples = build_sample_set(self.seed, self.samples_per_node, self.t_max)

    def mean_error(self, label: str) -> float:
        if label in self._cache:
            return self._cache[label]
        prompt = render_prompt(self.template, label)
        total, count = 0.0, 0
        for image in self.images:
            for sample in self._samples:
                total += self.scorer.score(ScoreRequest(image, prompt, sample))
                count += 1
        mean = total / count
        self._cache[label] = mean
        return mean
