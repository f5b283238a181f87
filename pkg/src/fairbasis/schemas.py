"""Request and response models of the HTTP service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field


class ScenarioRequest(BaseModel):
    config: str = Field(..., description="Scenario file text in the dotted-key format.")
    seed: int | None = Field(None, ge=0, lt=2**64, description="Overrides mc.seed.")


class PriceRequest(ScenarioRequest):
    instrument: Literal["cds", "bond", "floating-bond", "survival"] = "bond"


class RegressRequest(BaseModel):
    csv: str = Field(..., description="CSV text with header date,basis,lois,vix.")


class TableModel(BaseModel):
    name: str
    header: list[str]
    rows: list[list[str]]


class CommandResponse(BaseModel):
    command: str
    tables: list[TableModel]
    warnings: list[str] = []


class ErrorResponse(BaseModel):
    error: str
    key: str | None = None
    message: str
