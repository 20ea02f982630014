"""In-memory annotation sessions with LRU eviction.

Each session owns the uploaded image (already colour-transformed), the
current seed mask, segmentation parameters, a revision counter bumped on
every seed/parameter mutation, and the last computed mask tagged with the
revision it was computed from. Mutations and segmentation hold the session
lock, so a session has a single writer at a time while distinct sessions
run fully in parallel.
"""
from __future__ import annotations

import secrets
import threading
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from ..colors import transform_image
from ..raster import SEED_BG, SEED_FG, SEED_UNKNOWN, ChromaImage, RgbImage, \
    SeedMask, SegMask
from ..segmentation import SegmentationParams, segment_iterated


class UnknownSession(KeyError):
    pass


class StaleRevision(Exception):
    pass


@dataclass
class Session:
    session_id: str
    chroma: ChromaImage
    seed_labels: np.ndarray
    params: SegmentationParams = field(default_factory=SegmentationParams)
    revision: int = 1
    mask: SegMask | None = None
    mask_revision: int | None = None
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def width(self) -> int:
        return self.chroma.width

    @property
    def height(self) -> int:
        return self.chroma.height

    def seed_counts(self) -> tuple[int, int]:
        return (int((self.seed_labels == SEED_FG).sum()),
                int((self.seed_labels == SEED_BG).sum()))

    def apply_seed_runs(self, runs, mode: str):
        """Rasterize labeled pixel runs into the seed mask; bumps the revision.

        Runs are validated against the image bounds before anything is
        written, so a bad payload leaves the session untouched.
        """
        for i, run in enumerate(runs):
            if run.row >= self.height:
                raise ValueError(f"runs[{i}].row {run.row} outside image height {self.height}")
            if run.col >= self.width:
                raise ValueError(f"runs[{i}].col {run.col} outside image width {self.width}")
            if run.col + run.length > self.width:
                raise ValueError(f"runs[{i}] extends to column {run.col + run.length}, "
                                 f"beyond image width {self.width}")
        with self.lock:
            if mode == "replace":
                self.seed_labels = np.zeros_like(self.seed_labels)
            for run in runs:
                value = SEED_FG if run.label == "fg" else SEED_BG
                self.seed_labels[run.row, run.col:run.col + run.length] = value
            self.revision += 1
            return self.revision

    def update_params(self, **changes):
        with self.lock:
            current = {"lam": self.params.lam, "sigma_c": self.params.sigma_c,
                       "bins": self.params.bins, "max_rounds": self.params.max_rounds}
            current.update({k: v for k, v in changes.items() if v is not None})
            self.params = SegmentationParams(**current)
            self.revision += 1
            return self.revision

    def segment(self, expected_revision: int | None):
        """Run segmentation for the current seeds; records the source revision."""
        with self.lock:
            if expected_revision is not None and expected_revision != self.revision:
                raise StaleRevision(f"expected revision {expected_revision}, "
                                    f"session is at {self.revision}")
            seeds = SeedMask(self.seed_labels.copy())
            seeds.require_both_classes()
            result = segment_iterated(self.chroma, seeds, self.params)
            self.mask = result
            self.mask_revision = self.revision
            return result

    def current_mask(self) -> SegMask:
        """The stored mask, only if it reflects the current seeds/params."""
        with self.lock:
            if self.mask is None:
                raise LookupError("no segmentation has been computed yet")
            if self.mask_revision != self.revision:
                raise StaleRevision(f"stored mask is from revision {self.mask_revision}, "
                                    f"session is at {self.revision}")
            return self.mask


def mask_runs(mask: SegMask) -> list[tuple[int, int, int]]:
    """Row-wise run-length encoding of the foreground."""
    runs = []
    fg = mask.foreground
    for row in range(fg.shape[0]):
        line = fg[row]
        edges = np.flatnonzero(np.diff(np.concatenate(([0], line.view(np.int8), [0]))))
        for start, stop in zip(edges[::2], edges[1::2]):
            runs.append((row, int(start), int(stop - start)))
    return runs


class SessionStore:
    """Capacity-limited session map; least-recently-used sessions evict first."""

    def __init__(self, capacity: int = 64):
        if capacity < 1:
            raise ValueError("session capacity must be >= 1")
        self._capacity = capacity
        self._sessions: OrderedDict[str, Session] = OrderedDict()
        self._lock = threading.RLock()

    def create(self, image: RgbImage) -> Session:
        session = Session(
            session_id=secrets.token_hex(8),
            chroma=transform_image(image),
            seed_labels=np.full((image.height, image.width), SEED_UNKNOWN, dtype=np.uint8),
        )
        with self._lock:
            self._sessions[session.session_id] = session
            while len(self._sessions) > self._capacity:
                self._sessions.popitem(last=False)
        return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
            if session is None:
                raise UnknownSession(session_id)
            self._sessions.move_to_end(session_id)
            return session

    def delete(self, session_id: str):
        with self._lock:
            if session_id not in self._sessions:
                raise UnknownSession(session_id)
            del self._sessions[session_id]

    def __len__(self) -> int:
        with self._lock:
            return len(self._sessions)
