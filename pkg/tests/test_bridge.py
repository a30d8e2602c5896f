"""Bridge server conformance (the secondary component).

Runs only when the TypeScript bridge has been built (``npm install &&
npm run build`` under ``bridge/``); the rest of the suite never needs it.
An HDC run routed through the bridge's replay backend must be
byte-identical to the same run with the local replay scorer.
"""

import json
import shutil
import subprocess
import time
from contextlib import contextmanager
from pathlib import Path

import pytest

from hdc.errors import RemoteScorerError
from hdc.harness import canonical_json
from hdc.hierarchical import HdcConfig, PruneStrategy, classify_hdc
from hdc.scoring import (
    ImageRef,
    RemoteScorer,
    ReplayScorer,
    SamplePoint,
    ScoreRequest,
    render_prompt,
)
from hdc.tree import read_tree

FIXTURES = Path(__file__).parent / "fixtures"
BRIDGE_MAIN = Path(__file__).resolve().parents[1] / "bridge" / "dist" / "main.js"
NODE = shutil.which("node")

pytestmark = pytest.mark.skipif(
    NODE is None or not BRIDGE_MAIN.exists(),
    reason="bridge not built (run `npm install && npm run build` in bridge/)",
)

MATRIX = FIXTURES / "replay_matrix_200.json"
TREE = FIXTURES / "bridge_tree.json"

HDC_CONFIG = HdcConfig(
    m_final=8, m_prune=3, start_level=1, sample_seed=31,
    strategy=PruneStrategy.fixed(0.5),
)
IMAGES = [ImageRef("kite#0", true_class="kite"), ImageRef("urn#0", true_class="urn")]


@contextmanager
def bridge_tcp(*extra_args):
    proc = subprocess.Popen(
        [NODE, str(BRIDGE_MAIN), "--tcp", "0", "--backend", f"replay:{MATRIX}", *extra_args],
        stdout=subprocess.PIPE,
        stderr=subprocess.PIPE,
        text=True,
    )
    try:
        line = proc.stdout.readline()
        port = json.loads(line)["listening"]
        yield port
    finally:
        proc.terminate()
        proc.wait(timeout=10)


def run_all(scorer):
    tree = read_tree(TREE)
    outputs = []
    for image in IMAGES:
        result = classify_hdc(tree, image, scorer, HDC_CONFIG)
        outputs.append(
            {
                "prediction": result.prediction,
                "trace": result.trace.to_dict(),
                "mean_errors": result.mean_errors,
                "metrics": result.metrics.to_dict(),
            }
        )
    return canonical_json(outputs)


def test_fixture_has_200_entries():
    rows = json.loads(MATRIX.read_text())
    assert len(rows) == 200


def test_remote_replay_run_matches_local_exactly():
    local = run_all(ReplayScorer.from_file(MATRIX))
    with bridge_tcp() as port:
        with RemoteScorer.connect_tcp("127.0.0.1", port) as remote:
            routed = run_all(remote)
    assert routed == local  # byte-identical predictions, traces, and means
    print("ACCEPTANCE protocol-conformance: PASS", flush=True)


def test_stdio_transport_matches_local():
    local = run_all(ReplayScorer.from_file(MATRIX))
    command = f"{NODE} {BRIDGE_MAIN} --stdio --backend replay:{MATRIX}"
    with RemoteScorer.spawn(command) as remote:
        routed = run_all(remote)
    assert routed == local


def test_fault_keeps_connection_serviceable():
    with bridge_tcp() as port:
        with RemoteScorer.connect_tcp("127.0.0.1", port) as remote:
            good = ScoreRequest(
                ImageRef("pad#0"), render_prompt("A photo of a {label}", "eagle"),
                SamplePoint(1, 10_000),
            )
            assert remote.score(good) == 0.5
            missing = ScoreRequest(
                ImageRef("pad#0"), render_prompt("A photo of a {label}", "eagle"),
                SamplePoint(999, 42),
            )
            with pytest.raises(RemoteScorerError, match="fault"):
                remote.score(missing)
            # next request on the same connection still answers
            assert remote.score(good) == 0.5


def test_handshake_advertised_first():
    with bridge_tcp() as port:
        import socket

        with socket.create_connection(("127.0.0.1", port), timeout=10) as sock:
            first = sock.makefile("r", encoding="utf-8").readline()
    assert "hdc-scorer/1" in first


def test_server_restart_reproduces_outputs():
    with bridge_tcp() as port:
        with RemoteScorer.connect_tcp("127.0.0.1", port) as remote:
            first = run_all(remote)
    time.sleep(0.05)
    with bridge_tcp() as port:
        with RemoteScorer.connect_tcp("127.0.0.1", port) as remote:
            second = run_all(remote)
    assert first == second
