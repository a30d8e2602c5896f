"""Command-line surface: a thin client of the HTTP service.

Every subcommand resolves local files into a self-contained request,
posts it to the service, and writes the response back to disk. With no
``--server`` (or ``HDC_SERVER``) the service runs in-process, so the CLI
works standalone; point it at a live instance to share one long-running
engine between clients.

Exit codes: 0 success, 1 usage or configuration error, 2 data or
protocol failure.
"""

from __future__ import annotations

import json
import os
import sys
import warnings
from pathlib import Path

import click
import httpx

from .errors import ConfigError, HdcError
from .harness import canonical_json, resolve_experiment_config, write_run_outputs

SERVER_ENV_VAR = "HDC_SERVER"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


def open_client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from starlette.testclient import TestClient
    from .service.app import create_app

    return TestClient(create_app(), raise_server_exceptions=False)


class ServiceError(Exception):
    def __init__(self, status: int, detail: str):
        self.status = status
        self.detail = detail
        super().__init__(f"[{status}] {detail}")

    @property
    def exit_code(self) -> int:
        return EXIT_USAGE if self.status == 400 else EXIT_DATA


def call(client: httpx.Client, method: str, path: str, **kwargs) -> dict:
    try:
        response = client.request(method, path, **kwargs)
    except httpx.HTTPError as exc:
        raise ServiceError(-1, f"cannot reach service: {exc}") from exc
    if response.status_code >= 400:
        try:
            doc = response.json()
            detail = doc.get("detail", response.text)
        except ValueError:
            detail = response.text
        raise ServiceError(response.status_code, str(detail))
    return response.json()


def tree_source_payload(path: str) -> dict:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read tree file {path}: {exc}") from exc
    fmt = "json-adjacency" if path.endswith(".json") else "indented-text"
    return {"tree_text": text, "format": fmt}


def write_tree_doc(doc: list[dict], path: str) -> None:
    if path.endswith(".json"):
        Path(path).write_text(canonical_json(doc), encoding="utf-8")
    else:
        from .tree import load_tree

        Path(path).write_text(load_tree(json.dumps(doc)).to_indented_text(), encoding="utf-8")


def stats_line(stats: dict) -> str:
    branching = " ".join(f"{k}:{v}" for k, v in sorted(stats["branching"].items(), key=lambda kv: int(kv[0])))
    return (
        f"depth={stats['depth']} leaves={stats['leaf_count']} "
        f"nodes={stats['node_count']} root={stats['root_label']!r} "
        f"branching[{branching}]"
    )


@click.group()
@click.option(
    "--server",
    envvar=SERVER_ENV_VAR,
    default=None,
    help="Base URL of a running service; defaults to an in-process engine.",
)
@click.pass_context
def cli(ctx, server):
    """Hierarchical diffusion classifier engine."""
    ctx.obj = {"server": server}


@cli.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("hdc.service.app:app", host=host, port=port)


# -- tree subcommands ---------------------------------------------------------


@cli.group()
def tree():
    """Inspect and transform label-tree files."""


@tree.command()
@click.argument("tree_file", type=click.Path(exists=True))
@click.pass_context
def validate(ctx, tree_file):
    """Check a tree file; exit nonzero with a diagnostic if invalid."""
    with open_client(ctx.obj["server"]) as client:
        doc = call(client, "POST", "/tree/validate", json=tree_source_payload(tree_file))
    if doc["valid"]:
        click.echo(f"OK {stats_line(doc['stats'])}")
    else:
        click.echo(f"INVALID {doc['error']}", err=True)
        sys.exit(EXIT_DATA)


@tree.command()
@click.argument("tree_file", type=click.Path(exists=True))
@click.pass_context
def stats(ctx, tree_file):
    """Print depth, node/leaf counts, and the branching histogram."""
    with open_client(ctx.obj["server"]) as client:
        doc = call(client, "POST", "/tree/stats", json=tree_source_payload(tree_file))
    click.echo(stats_line(doc))


@tree.command("limit-depth")
@click.option("--max", "max_depth", type=int, required=True, help="Depth cap.")
@click.argument("tree_in", type=click.Path(exists=True))
@click.argument("tree_out", type=click.Path())
@click.pass_context
def limit_depth_cmd(ctx, max_depth, tree_in, tree_out):
    """Cap tree depth, re-attaching deeper classes, and write the result."""
    payload = {**tree_source_payload(tree_in), "max_depth": max_depth}
    with open_client(ctx.obj["server"]) as client:
        doc = call(client, "POST", "/tree/limit-depth", json=payload)
    write_tree_doc(doc["tree"], tree_out)
    click.echo(f"wrote {tree_out}: {stats_line(doc['stats'])}")


@tree.command()
@click.option("--label", required=True, help="New class label.")
@click.option(
    "--mode",
    type=click.Choice(["under-root", "greedy"]),
    default="under-root",
    show_default=True,
)
@click.option(
    "--probe",
    "probe_file",
    type=click.Path(exists=True),
    default=None,
    help="JSON probe spec (scorer, images, samples_per_node) for greedy mode.",
)
@click.argument("tree_in", type=click.Path(exists=True))
@click.argument("tree_out", type=click.Path())
@click.pass_context
def insert(ctx, label, mode, probe_file, tree_in, tree_out):
    """Add a class and write the new tree."""
    payload = {**tree_source_payload(tree_in), "label": label, "mode": mode}
    if probe_file:
        payload["probe"] = json.loads(Path(probe_file).read_text(encoding="utf-8"))
    with open_client(ctx.obj["server"]) as client:
        doc = call(client, "POST", "/tree/insert", json=payload)
    write_tree_doc(doc["tree"], tree_out)
    click.echo(f"wrote {tree_out}: {stats_line(doc['stats'])}")


@tree.command()
@click.option("--label", required=True, help="Class label to remove.")
@click.argument("tree_in", type=click.Path(exists=True))
@click.argument("tree_out", type=click.Path())
@click.pass_context
def remove(ctx, label, tree_in, tree_out):
    """Remove a class and write the new tree."""
    payload = {**tree_source_payload(tree_in), "label": label}
    with open_client(ctx.obj["server"]) as client:
        doc = call(client, "POST", "/tree/remove", json=payload)
    write_tree_doc(doc["tree"], tree_out)
    click.echo(f"wrote {tree_out}: {stats_line(doc['stats'])}")


# -- datasets -------------------------------------------------------------------


@cli.command("gen-synthetic")
@click.option("--tree", "tree_file", type=click.Path(exists=True), required=True)
@click.option("--per-class", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_file", type=click.Path(), required=True)
@click.pass_context
def gen_synthetic(ctx, tree_file, per_class, seed, out_file):
    """Write a synthetic dataset file (per-class image refs)."""
    payload = {**tree_source_payload(tree_file), "per_class": per_class, "seed": seed}
    with open_client(ctx.obj["server"]) as client:
        doc = call(client, "POST", "/datasets/synthetic", json=payload)
    Path(out_file).write_text(canonical_json(doc["dataset"]), encoding="utf-8")
    click.echo(f"wrote {out_file}: {doc['n_images']} images hash={doc['dataset_hash'][:12]}")


# -- runs ------------------------------------------------------------------------


@cli.command()
@click.option("--config", "config_file", type=click.Path(exists=True), required=True)
@click.option("--output-dir", default=None, help="Override the config's output_dir.")
@click.option("--method", default=None, type=click.Choice(["flat", "hdc"]))
@click.option("--workers", default=None, type=int)
@click.option("--no-traces", is_flag=True, help="Skip writing per-image trace files.")
@click.pass_context
def run(ctx, config_file, output_dir, method, workers, no_traces):
    """Run an experiment described by a JSON config; write report files."""
    config = json.loads(Path(config_file).read_text(encoding="utf-8"))
    if method:
        config["method"] = method
    if workers is not None:
        config["workers"] = workers
    out_dir = output_dir or config.get("output_dir")
    if not out_dir:
        raise ConfigError("config has no output_dir and --output-dir not given")

    payload = resolve_experiment_config(config, Path(config_file).parent)
    payload["with_traces"] = not no_traces

    with open_client(ctx.obj["server"]) as client:
        doc = call(client, "POST", "/runs", json=payload)
    written = write_run_outputs(
        out_dir, doc["report"], doc["traces"], doc["confusion_subtrees"]
    )
    report = doc["report"]
    click.echo(
        f"{report['method']}: {report['n_images']} images "
        f"top1={report['top_k_overall']['1']:.2f}% "
        f"calls/image={report['mean_calls_per_image']:.1f} "
        f"({doc['elapsed_seconds']:.2f}s)"
    )
    for path in written:
        click.echo(f"  wrote {path}")


@cli.command()
@click.argument("baseline_report", type=click.Path(exists=True))
@click.argument("method_report", type=click.Path(exists=True))
@click.option("--out", "out_file", type=click.Path(), default=None)
@click.pass_context
def compare(ctx, baseline_report, method_report, out_file):
    """Compare two run reports (same dataset required)."""
    payload = {
        "baseline": json.loads(Path(baseline_report).read_text(encoding="utf-8")),
        "method": json.loads(Path(method_report).read_text(encoding="utf-8")),
    }
    with open_client(ctx.obj["server"]) as client:
        doc = call(client, "POST", "/compare", json=payload)
    click.echo(doc["table"])
    if out_file:
        Path(out_file).write_text(canonical_json(doc["comparison"]), encoding="utf-8")
        click.echo(f"wrote {out_file}")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return EXIT_OK
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except SystemExit as exc:
        return int(exc.code or 0)
    except ServiceError as exc:
        click.echo(f"error: {exc.detail}", err=True)
        return exc.exit_code
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return EXIT_USAGE
    except HdcError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_DATA
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
