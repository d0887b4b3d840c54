"""Command line client for the experiment service.

Each subcommand assembles a config (file plus flag overrides), posts it to
the service, and writes the returned tables. Without ``--server`` the
FastAPI app is mounted in process, so the default experience is a plain
local tool; with it, the same request goes over the network.

Exit codes: 0 success, 2 invalid config, 3 DSP diagnostic failure.
"""

from __future__ import annotations

import asyncio
import sys
from pathlib import Path

import click
import httpx
import yaml

from . import __version__
from .errors import ConfigError
from .experiments import RunResult
from .results import write_run

EXIT_CONFIG = 2
EXIT_DSP = 3


def _load_payload(config_path: str | None) -> dict:
    if config_path is None:
        return {}
    text = Path(config_path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {config_path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config document must be a mapping")
    return data


async def _post_in_process(experiment: str, payload: dict) -> httpx.Response:
    from .service import create_app

    transport = httpx.ASGITransport(app=create_app())
    async with httpx.AsyncClient(
        transport=transport, base_url="http://simplexsim.local", timeout=None
    ) as client:
        return await client.post(f"/experiments/{experiment}", json=payload)


def _post(server: str | None, experiment: str, payload: dict) -> httpx.Response:
    if server is None:
        return asyncio.run(_post_in_process(experiment, payload))
    with httpx.Client(base_url=server, timeout=None) as client:
        return client.post(f"/experiments/{experiment}", json=payload)


def _run(
    experiment: str,
    config: str | None,
    seed: int | None,
    out: str | None,
    table_format: str,
    jobs: int | None,
    server: str | None,
) -> None:
    try:
        payload = _load_payload(config)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except OSError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)

    overrides = payload.get("config") if "manifest_version" in payload else payload
    if isinstance(overrides, dict):
        if seed is not None:
            overrides["master_seed"] = seed
        if jobs is not None:
            overrides["jobs"] = jobs

    try:
        resp = _post(server, experiment, payload)
    except httpx.HTTPError as exc:
        click.echo(f"request failed: {exc}", err=True)
        sys.exit(1)

    if resp.status_code == 422:
        click.echo(f"config error: {_detail(resp)}", err=True)
        sys.exit(EXIT_CONFIG)
    if resp.status_code == 409:
        click.echo(f"DSP diagnostic failure: {_detail(resp)}", err=True)
        sys.exit(EXIT_DSP)
    if resp.status_code != 200:
        click.echo(f"server error {resp.status_code}: {_detail(resp)}", err=True)
        sys.exit(1)

    doc = resp.json()
    result = RunResult(
        columns=doc["columns"],
        rows=doc["rows"],
        manifest=doc["manifest"],
        extras={
            stem: (tbl["columns"], tbl["rows"]) for stem, tbl in doc["extras"].items()
        },
    )
    out_dir = out or result.manifest["config"].get("out_dir") or "."
    paths = write_run(out_dir, result, table_format=table_format)
    click.echo(f"{len(result.rows)} rows")
    for name in sorted(paths):
        click.echo(str(paths[name]))


def _detail(resp: httpx.Response) -> str:
    try:
        return resp.json().get("detail", resp.text)
    except ValueError:
        return resp.text


def _experiment_command(name: str, help_text: str):
    @click.command(name=name, help=help_text)
    @click.option("--config", type=click.Path(), default=None, help="Config file (YAML or JSON; a manifest.json replays its run).")
    @click.option("--seed", type=click.IntRange(min=0), default=None, help="Override the master seed.")
    @click.option("--out", type=click.Path(), default=None, help="Output directory (default from config, else cwd).")
    @click.option("--format", "table_format", type=click.Choice(["csv", "json"]), default="csv", show_default=True, help="Table encoding.")
    @click.option("--jobs", type=click.IntRange(min=1), default=None, help="Worker processes for sweep points.")
    @click.option("--server", default=None, help="Remote service URL (default: run in process).")
    def cmd(config, seed, out, table_format, jobs, server):
        _run(name, config, seed, out, table_format, jobs, server)

    return cmd


@click.group()
@click.version_option(__version__, prog_name="simplexsim")
def main() -> None:
    """Coherent optical transmission experiments, driven by config files."""


main.add_command(_experiment_command("theory", "Closed-form BER curves over an Eb/N0 grid."))
main.add_command(_experiment_command("b2b", "Back-to-back OSNR sweep through the blind receiver."))
main.add_command(_experiment_command("power-sweep", "Launch-power sweep over the split-span link."))
main.add_command(_experiment_command("span-loss-sweep", "VOA sweep at fixed launch power."))
main.add_command(_experiment_command("constellation", "One block at a configured OSNR with per-stage symbol dumps."))
main.add_command(_experiment_command("metrics", "Constellation geometry table."))


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host: str, port: int) -> None:
    """Run the experiment service over HTTP."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
