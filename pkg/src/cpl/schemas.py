"""Request and response bodies for the experiment service."""

from pydantic import BaseModel, ConfigDict


class HealthResponse(BaseModel):
    status: str
    version: str


class TrainResponse(BaseModel):
    epochs: int
    best_epoch: int
    val_accuracy: float
    val_mae: float
    test_accuracy: float
    test_mae: float
    checkpoint: str
    training_log: str
    summary: str


class EvalResponse(BaseModel):
    accuracy: float
    mae: float
    split: str
    samples: int
    output: str


class SweepRow(BaseModel):
    value: float
    accuracy: float
    mae: float


class SweepResponse(BaseModel):
    parameter: str
    rows: list[SweepRow]
    output: str


class AblateRow(BaseModel):
    variant: str
    accuracy: float
    mae: float


class AblateResponse(BaseModel):
    ablation: str
    rows: list[AblateRow]
    output: str


class VizResponse(BaseModel):
    proxies: str
    features: str
    figure: str
    samples: int
    accuracy: float


class PredictRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    checkpoint: str
    features: list[list[float]]


class PredictResponse(BaseModel):
    predictions: list[int]


class ErrorInfo(BaseModel):
    kind: str
    message: str


class ErrorResponse(BaseModel):
    error: ErrorInfo
