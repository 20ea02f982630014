"""Request/response models for the annotation service API."""
from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class SeedRun(BaseModel):
    label: Literal["fg", "bg"]
    row: int = Field(ge=0)
    col: int = Field(ge=0)
    length: int = Field(ge=1)


class SeedsUpdate(BaseModel):
    mode: Literal["replace", "merge"] = "merge"
    runs: list[SeedRun]


class ParamsUpdate(BaseModel):
    lam: Optional[float] = Field(default=None, ge=0)
    sigma_c: Optional[float] = Field(default=None, gt=0)
    bins: Optional[int] = Field(default=None, ge=1, le=64)
    max_rounds: Optional[int] = Field(default=None, ge=1, le=100)


class ParamsOut(BaseModel):
    lam: float
    sigma_c: Optional[float]
    bins: int
    max_rounds: int


class SegmentRequest(BaseModel):
    expected_revision: Optional[int] = None


class SessionCreated(BaseModel):
    session_id: str
    width: int
    height: int
    revision: int
    params: ParamsOut


class MaskInfo(BaseModel):
    revision: int
    energy: float
    rounds: int
    foreground_pixels: int


class SeedCounts(BaseModel):
    fg: int
    bg: int


class SessionMeta(BaseModel):
    session_id: str
    width: int
    height: int
    revision: int
    params: ParamsOut
    seeds: SeedCounts
    mask: Optional[MaskInfo] = None


class SeedsOut(BaseModel):
    revision: int
    seeds: SeedCounts


class MaskRle(BaseModel):
    width: int
    height: int
    revision: int
    energy: float
    rounds: int
    runs: list[tuple[int, int, int]]  # (row, start col, length) foreground runs


class ClassifyRequest(BaseModel):
    model: str


class ClassifyResponse(BaseModel):
    label: int
    class_name: str
    classifier: Literal["knn", "pnn"]
    nearest_distance: Optional[float] = None
    densities: Optional[dict[str, float]] = None


class ModelList(BaseModel):
    models: list[str]
