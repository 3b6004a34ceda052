from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .. import __version__
from ..config import configure_logging
from ..errors import ConfigError, FreqLemmaError, error_payload
from ..models.run_config import (
    CheckPeConfig,
    ClosedLoopConfig,
    EstimateFrfConfig,
    FreqRespConfig,
    GenDataConfig,
    LqrConfig,
    MonteCarloConfig,
    SimulateConfig,
)
from ..runner.commands import (
    cmd_check_pe,
    cmd_deepc,
    cmd_estimate_frf,
    cmd_freepc,
    cmd_freqresp,
    cmd_gen_data,
    cmd_lqr,
    cmd_monte_carlo,
    cmd_mpc,
    cmd_simulate,
)

configure_logging()

app = FastAPI(
    title="freqlemma",
    version=__version__,
)


@app.exception_handler(RequestValidationError)
async def validation_error_handler(request: Request, exc: RequestValidationError):
    return JSONResponse(status_code=422, content={"error": "ConfigError", "message": str(exc)})


@app.exception_handler(ConfigError)
async def config_error_handler(request: Request, exc: ConfigError):
    return JSONResponse(status_code=422, content=error_payload(exc))


@app.exception_handler(FreqLemmaError)
async def domain_error_handler(request: Request, exc: FreqLemmaError):
    return JSONResponse(status_code=400, content=error_payload(exc))


# The handlers below run in the worker thread pool: every command is CPU bound.

@app.post("/gen-data")
def gen_data_endpoint(payload: GenDataConfig):
    """
    Generate a dataset. The dataset itself is returned only through the
    summary; use the CLI to write files.
    """
    return JSONResponse(content=cmd_gen_data(payload))


@app.post("/estimate-frf")
def estimate_frf_endpoint(payload: EstimateFrfConfig):
    return JSONResponse(content=cmd_estimate_frf(payload))


@app.post("/check-pe")
def check_pe_endpoint(payload: CheckPeConfig):
    """
    Rank-based excitation report for a dataset or trajectory file on the
    server's file system.
    """
    return JSONResponse(content=cmd_check_pe(payload))


@app.post("/simulate")
def simulate_endpoint(payload: SimulateConfig):
    return JSONResponse(content=cmd_simulate(payload))


@app.post("/freqresp")
def freqresp_endpoint(payload: FreqRespConfig):
    return JSONResponse(content=cmd_freqresp(payload))


@app.post("/lqr")
def lqr_endpoint(payload: LqrConfig):
    return JSONResponse(content=cmd_lqr(payload))


@app.post("/freepc")
def freepc_endpoint(payload: ClosedLoopConfig):
    return JSONResponse(content=cmd_freepc(payload))


@app.post("/deepc")
def deepc_endpoint(payload: ClosedLoopConfig):
    return JSONResponse(content=cmd_deepc(payload))


@app.post("/mpc")
def mpc_endpoint(payload: ClosedLoopConfig):
    return JSONResponse(content=cmd_mpc(payload))


@app.post("/monte-carlo")
def monte_carlo_endpoint(payload: MonteCarloConfig):
    """
    Seeded Monte Carlo study:
    - closed_loop: FreePC cost per period count (plus the model benchmark)
    - simulation_error: data-driven simulation error per period count
    """
    return JSONResponse(content=cmd_monte_carlo(payload))
