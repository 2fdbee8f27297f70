"""Shared test helpers: random frame generation and the brute-force
pair-violation oracle that the fast path is checked against."""

from __future__ import annotations

import math
import random
from datetime import datetime, timezone

from citypulse.core import BoundingBox, ObjectClass
from citypulse.ingestion import Detection, DetectionFrame
from citypulse.sociability import ProjectionParams

EPOCH = datetime(2020, 5, 18, 12, 0, tzinfo=timezone.utc)


def random_frame(rng: random.Random, max_persons: int = 50, seq: int = 0) -> DetectionFrame:
    """Random frame with persons plus noise: other classes, low-confidence
    persons, and occasional degenerate (tiny) boxes."""
    detections: list[Detection] = []
    for _ in range(rng.randint(0, max_persons)):
        h = rng.uniform(3.0, 400.0)  # some fall under the degenerate threshold
        box = BoundingBox(
            x=rng.uniform(0, 1900), y=rng.uniform(0, 1000), w=rng.uniform(4, 150), h=h
        )
        conf = rng.uniform(0.05, 1.0)  # some fall under the cutoff
        detections.append(Detection(ObjectClass.PERSON, conf, box))
    for _ in range(rng.randint(0, 5)):
        cls = rng.choice([ObjectClass.CAR, ObjectClass.TRUCK, ObjectClass.BICYCLE, ObjectClass.BUS])
        box = BoundingBox(rng.uniform(0, 1900), rng.uniform(0, 1000), 80, 60)
        detections.append(Detection(cls, rng.uniform(0.5, 1.0), box))
    rng.shuffle(detections)
    return DetectionFrame("cam_test", "nyc", EPOCH, seq, tuple(detections))


def oracle_analyze(frame: DetectionFrame, params: ProjectionParams) -> dict:
    """Straight-line O(n^2) reimplementation used as the independent oracle."""
    counts = {c.value: 0 for c in ObjectClass}
    persons = []
    for det in frame.detections:
        if det.confidence < params.confidence_cutoff:
            continue
        counts[det.object_class.value] += 1
        if det.object_class == ObjectClass.PERSON:
            persons.append(det.bbox)

    eligible = [b for b in persons if b.h >= params.min_box_height_px]
    violated_pairs = 0
    violating_boxes = set()
    distances = []
    for i in range(len(eligible)):
        for j in range(i + 1, len(eligible)):
            a, b = eligible[i], eligible[j]
            ca = (a.x + a.w / 2, a.y + a.h / 2)
            cb = (b.x + b.w / 2, b.y + b.h / 2)
            pixel = math.sqrt((ca[0] - cb[0]) ** 2 + (ca[1] - cb[1]) ** 2)
            ra = params.assumed_height_m / a.h
            rb = params.assumed_height_m / b.h
            meters = pixel * (ra + rb) / 2
            distances.append(meters)
            if meters < params.distance_threshold_m:
                violated_pairs += 1
                violating_boxes.add(i)
                violating_boxes.add(j)

    n = len(persons)
    return {
        "person_count": n,
        "counts_by_class": counts,
        "violated_pairs": violated_pairs,
        "violating_persons": len(violating_boxes),
        "compliance_rate": None if n == 0 else 1 - len(violating_boxes) / n,
        "distances": sorted(distances),
    }
