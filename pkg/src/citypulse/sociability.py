"""Social-distancing analytics over camera detection frames.

Pixel geometry only: centroids of pedestrian bounding boxes, a
real-height/pixel-height ratio to project pixel distances into meters
(every person assumed 1.70 m tall), and pairwise violation counting per
frame. Centroid distance in image space with height-based scaling ignores
perspective depth; that simplification is deliberate and documented.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from math import hypot, sqrt

from .core import BoundingBox, ObjectClass
from .ingestion import DetectionFrame

#: 6 ft in meters; U.S. distancing guidance at the time.
SIX_FEET_M = 1.8288


class EmptyWindow(Exception):
    """summarize() was asked to fold zero frames."""


@dataclass(frozen=True)
class ProjectionParams:
    """Knobs for projecting pixel geometry into meters."""

    assumed_height_m: float = 1.70
    distance_threshold_m: float = SIX_FEET_M
    confidence_cutoff: float = 0.5
    min_box_height_px: float = 8.0  # below this the ratio explodes; box is degenerate

    def __post_init__(self) -> None:
        if self.assumed_height_m <= 0 or self.distance_threshold_m <= 0:
            raise ValueError("projection parameters must be strictly positive")
        if self.min_box_height_px <= 0:
            raise ValueError("min_box_height_px must be strictly positive")


@dataclass(frozen=True)
class FrameResult:
    """Per-frame sociability readout."""

    camera: str
    captured_at: datetime
    person_count: int
    counts_by_class: dict[str, int]
    violated_pairs: int
    violating_persons: int
    compliance_rate: float | None  # absent when no pedestrians in frame
    degenerate_boxes: int = 0
    pair_distances: tuple[tuple[int, int, float], ...] | None = None

    def to_json(self) -> dict:
        doc: dict = {
            "camera": self.camera,
            "capturedAt": self.captured_at.isoformat(),
            "personCount": self.person_count,
            "countsByClass": dict(self.counts_by_class),
            "violatedPairs": self.violated_pairs,
            "violatingPersons": self.violating_persons,
            "complianceRate": self.compliance_rate,
            "degenerateBoxes": self.degenerate_boxes,
        }
        if self.pair_distances is not None:
            doc["pairDistances"] = [
                {"i": i, "j": j, "meters": m} for i, j, m in self.pair_distances
            ]
        return doc


@dataclass(frozen=True)
class ComplianceSummary:
    """Window-level aggregation of frame results."""

    from_ts: datetime
    to_ts: datetime
    frames: int
    avg_peds_density: float
    max_peds_density: int
    compliance_rate: float | None  # pedestrian-weighted; absent if no pedestrians seen
    total_violated_pairs: int

    def to_json(self) -> dict:
        return {
            "from": self.from_ts.isoformat(),
            "to": self.to_ts.isoformat(),
            "frames": self.frames,
            "avgPedsDensity": self.avg_peds_density,
            "maxPedsDensity": self.max_peds_density,
            "complianceRate": self.compliance_rate,
            "totalViolatedPairs": self.total_violated_pairs,
        }


def centroid(bbox: BoundingBox) -> tuple[float, float]:
    """Center of a bounding box in pixels."""
    return (bbox.x + bbox.w / 2.0, bbox.y + bbox.h / 2.0)


def rp_ratio(bbox: BoundingBox, params: ProjectionParams) -> float:
    """Meters per pixel for one person: assumed real height over pixel height."""
    return params.assumed_height_m / bbox.h


def pair_distance(a: BoundingBox, b: BoundingBox, params: ProjectionParams) -> float:
    """Projected real-world distance between two persons' centroids.

    The pixel distance is scaled by the mean of the two R-P ratios, which
    damps single-box noise compared to picking either person's ratio.
    """
    ax, ay = centroid(a)
    bx, by = centroid(b)
    pixel = hypot(ax - bx, ay - by)
    return pixel * (rp_ratio(a, params) + rp_ratio(b, params)) / 2.0


def analyze_frame(
    frame: DetectionFrame,
    params: ProjectionParams | None = None,
    *,
    include_pairs: bool = False,
) -> FrameResult:
    """Count violated social-distancing pairs and per-class objects in a frame.

    Persons below the confidence cutoff are ignored entirely; persons whose
    box height is under ``min_box_height_px`` count toward density but are
    excluded from pair analysis (their projected ratio is unusable).
    ``pair_distances`` indices refer to the frame's person list after the
    confidence cut, in detection order.
    """
    p = params or ProjectionParams()
    cutoff = p.confidence_cutoff
    counts = {cls.value: 0 for cls in ObjectClass}
    persons: list[BoundingBox] = []
    for det in frame.detections:
        if det.confidence < cutoff:
            continue
        counts[det.object_class.value] += 1
        if det.object_class is ObjectClass.PERSON:
            persons.append(det.bbox)

    person_count = len(persons)
    min_h = p.min_box_height_px
    eligible: list[int] = [i for i, box in enumerate(persons) if box.h >= min_h]
    degenerate = person_count - len(eligible)

    # Precompute centroids and ratios once; the pair loop is the hot path.
    height = p.assumed_height_m
    cx: list[float] = []
    cy: list[float] = []
    ratio: list[float] = []
    for i in eligible:
        box = persons[i]
        cx.append(box.x + box.w * 0.5)
        cy.append(box.y + box.h * 0.5)
        ratio.append(height / box.h)

    threshold = p.distance_threshold_m
    violated_pairs = 0
    violating: set[int] = set()
    pairs: list[tuple[int, int, float]] = []
    n = len(eligible)
    for i in range(n):
        xi = cx[i]
        yi = cy[i]
        ri = ratio[i]
        for j in range(i + 1, n):
            dx = xi - cx[j]
            dy = yi - cy[j]
            meters = sqrt(dx * dx + dy * dy) * (ri + ratio[j]) * 0.5
            if meters < threshold:
                violated_pairs += 1
                violating.add(i)
                violating.add(j)
            if include_pairs:
                pairs.append((eligible[i], eligible[j], meters))

    compliance = None if person_count == 0 else 1.0 - len(violating) / person_count
    return FrameResult(
        camera=frame.camera,
        captured_at=frame.captured_at,
        person_count=person_count,
        counts_by_class=counts,
        violated_pairs=violated_pairs,
        violating_persons=len(violating),
        compliance_rate=compliance,
        degenerate_boxes=degenerate,
        pair_distances=tuple(pairs) if include_pairs else None,
    )


def summarize(
    frame_results: list[FrameResult],
    from_ts: datetime,
    to_ts: datetime,
) -> ComplianceSummary:
    """Fold frame results into window statistics.

    The compliance rate is pedestrian-weighted: one minus the share of all
    observed pedestrians that stood in at least one violated pair. Windows
    with frames but no pedestrians report compliance as absent.
    """
    if not frame_results:
        raise EmptyWindow("no frames in window")
    total_persons = sum(r.person_count for r in frame_results)
    total_violating = sum(r.violating_persons for r in frame_results)
    compliance = None if total_persons == 0 else 1.0 - total_violating / total_persons
    return ComplianceSummary(
        from_ts=from_ts,
        to_ts=to_ts,
        frames=len(frame_results),
        avg_peds_density=total_persons / len(frame_results),
        max_peds_density=max(r.person_count for r in frame_results),
        compliance_rate=compliance,
        total_violated_pairs=sum(r.violated_pairs for r in frame_results),
    )
