"""FastAPI service exposing the pricing commands.

Every endpoint returns formatted CSV tables; the CLI writes them to disk.
Validation problems map to 422, numerical failures to 500, both with an
``ErrorResponse`` body.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.concurrency import run_in_threadpool
from fastapi.responses import JSONResponse

from . import __version__, commands
from .analytics import IngestionError, SingularDesignError
from .basis import DegenerateHedgeError
from .config import ConfigError, ScenarioConfig
from .models import UnsupportedModelError
from .pde import NumericalError
from .schemas import CommandResponse, ErrorResponse, PriceRequest, RegressRequest, ScenarioRequest, TableModel

app = FastAPI(title="fairbasis", version=__version__)


def _response(command: str, result: commands.CommandResult) -> CommandResponse:
    tables = [TableModel(name=t.name, header=t.header, rows=t.rows) for t in result.tables]
    return CommandResponse(command=command, tables=tables, warnings=result.warnings)


def _error(status: int, kind: str, exc: Exception, key: str | None = None) -> JSONResponse:
    body = ErrorResponse(error=kind, key=key, message=str(exc))
    return JSONResponse(status_code=status, content=body.model_dump())


@app.exception_handler(ConfigError)
async def _config_error(request: Request, exc: ConfigError):
    return _error(422, "config", exc, exc.key)


@app.exception_handler(IngestionError)
async def _ingestion_error(request: Request, exc: IngestionError):
    return _error(422, "ingestion", exc)


@app.exception_handler(SingularDesignError)
async def _singular(request: Request, exc: SingularDesignError):
    return _error(422, "singular_design", exc)


@app.exception_handler(UnsupportedModelError)
async def _unsupported(request: Request, exc: UnsupportedModelError):
    return _error(422, "unsupported_model", exc)


@app.exception_handler(DegenerateHedgeError)
async def _degenerate(request: Request, exc: DegenerateHedgeError):
    return _error(500, "degenerate_hedge", exc)


@app.exception_handler(NumericalError)
async def _numerical(request: Request, exc: NumericalError):
    return _error(500, "numerical", exc)


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/price", response_model=CommandResponse)
async def price(req: PriceRequest) -> CommandResponse:
    cfg = ScenarioConfig.from_text(req.config)
    return _response("price", await run_in_threadpool(commands.price, cfg, req.instrument))


@app.post("/fair-basis", response_model=CommandResponse)
async def fair_basis(req: ScenarioRequest) -> CommandResponse:
    cfg = ScenarioConfig.from_text(req.config)
    return _response("fair-basis", await run_in_threadpool(commands.fair_basis, cfg))


@app.post("/jtd-profile", response_model=CommandResponse)
async def jtd_profile(req: ScenarioRequest) -> CommandResponse:
    cfg = ScenarioConfig.from_text(req.config)
    return _response("jtd-profile", await run_in_threadpool(commands.jtd, cfg))


@app.post("/mc-verify", response_model=CommandResponse)
async def mc_verify(req: ScenarioRequest) -> CommandResponse:
    cfg = ScenarioConfig.from_text(req.config)
    return _response("mc-verify", await run_in_threadpool(commands.mc_verify, cfg, req.seed))


@app.post("/capital", response_model=CommandResponse)
async def capital(req: ScenarioRequest) -> CommandResponse:
    cfg = ScenarioConfig.from_text(req.config)
    return _response("capital", await run_in_threadpool(commands.capital, cfg, req.seed))


@app.post("/regress", response_model=CommandResponse)
async def regress(req: RegressRequest) -> CommandResponse:
    return _response("regress", await run_in_threadpool(commands.regress, req.csv))
