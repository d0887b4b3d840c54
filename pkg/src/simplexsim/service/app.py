"""FastAPI service exposing format metrics and experiment runs.

The CLI mounts this app in process by default; pointing it at a remote
instance changes nothing but the transport. Experiment configs are
validated with the same strict schema either way, so a bad document fails
with 422 before any computation starts, and a DSP chain that cannot lock
surfaces as 409 with the failing axis point in the detail string.
"""

from __future__ import annotations

from fastapi import Body, FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..config import config_from_dict
from ..errors import ConfigError, DspDiagnosticError
from ..experiments import _RUNNERS, run_experiment
from ..formats import FORMAT_NAMES, build_format, format_metrics, osnr_gap_db


def create_app() -> FastAPI:
    app = FastAPI(title="simplexsim", version=__version__)

    @app.exception_handler(ConfigError)
    async def _config_error(request: Request, exc: ConfigError) -> JSONResponse:
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(DspDiagnosticError)
    async def _dsp_error(request: Request, exc: DspDiagnosticError) -> JSONResponse:
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.get("/formats")
    def formats() -> dict:
        return {"formats": list(FORMAT_NAMES)}

    @app.get("/formats/{name}/metrics")
    def metrics(name: str) -> JSONResponse:
        try:
            fd = build_format(name)
        except ValueError as exc:
            return JSONResponse(status_code=404, content={"detail": str(exc)})
        m = format_metrics(fd)
        return JSONResponse(
            {
                "format": fd.name,
                "bits_per_symbol": fd.bits_per_symbol,
                "d_min": m.d_min,
                "p_avg": m.p_avg,
                "energy_per_dmin_sq": m.energy_per_dmin_sq,
                "asymptotic_gain_db": osnr_gap_db(build_format("DP-BPSK"), fd),
            }
        )

    @app.post("/experiments/{name}")
    def run(name: str, payload: dict = Body(...)) -> JSONResponse:
        if name not in _RUNNERS:
            return JSONResponse(
                status_code=404,
                content={"detail": f"unknown experiment {name!r}"},
            )
        payload = dict(payload)
        if "manifest_version" not in payload:
            payload.setdefault("experiment", name)
        cfg = config_from_dict(payload)
        if cfg.experiment != name:
            raise ConfigError(
                f"config is for experiment {cfg.experiment!r}, "
                f"but {name!r} was requested"
            )
        result = run_experiment(cfg)
        return JSONResponse(
            {
                "columns": result.columns,
                "rows": result.rows,
                "manifest": result.manifest,
                "extras": {
                    stem: {"columns": cols, "rows": rows}
                    for stem, (cols, rows) in result.extras.items()
                },
            }
        )

    return app
