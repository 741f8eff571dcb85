"""FastAPI service exposing the experiment runners over HTTP.

Domain failures surface as HTTP 400 with a typed body::

    {"error": {"kind": "configuration" | "data" | "numeric", "message": ...}}

so clients can map them to distinct exit codes.  Artifacts are written to
the server-side ``output_dir`` named in the request; responses carry the
paths along with the headline metrics.
"""

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import __version__
from .config import RunConfig
from .errors import ConfigurationError, CplError, DataError, NumericError
from .experiments import (
    predict_features,
    run_ablate,
    run_eval,
    run_sweep,
    run_training,
    run_viz,
)
from .schemas import (
    AblateResponse,
    EvalResponse,
    HealthResponse,
    PredictRequest,
    PredictResponse,
    SweepResponse,
    TrainResponse,
    VizResponse,
)


def error_kind(exc: CplError) -> str:
    if isinstance(exc, ConfigurationError):
        return "configuration"
    if isinstance(exc, DataError):
        return "data"
    if isinstance(exc, NumericError):
        return "numeric"
    return "error"


def create_app() -> FastAPI:
    app = FastAPI(title="cpl", version=__version__)

    @app.exception_handler(CplError)
    async def handle_domain_error(request: Request, exc: CplError):
        return JSONResponse(
            status_code=400,
            content={"error": {"kind": error_kind(exc), "message": str(exc)}},
        )

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/train", response_model=TrainResponse)
    def train_endpoint(config: RunConfig) -> dict:
        return run_training(config)

    @app.post("/eval", response_model=EvalResponse)
    def eval_endpoint(config: RunConfig) -> dict:
        return run_eval(config)

    @app.post("/sweep", response_model=SweepResponse)
    def sweep_endpoint(config: RunConfig) -> dict:
        return run_sweep(config)

    @app.post("/ablate", response_model=AblateResponse)
    def ablate_endpoint(config: RunConfig) -> dict:
        return run_ablate(config)

    @app.post("/viz", response_model=VizResponse)
    def viz_endpoint(config: RunConfig) -> dict:
        return run_viz(config)

    @app.post("/predict", response_model=PredictResponse)
    def predict_endpoint(request_body: PredictRequest) -> dict:
        predictions = predict_features(request_body.checkpoint,
                                       request_body.features)
        return {"predictions": predictions}

    return app


app = create_app()
