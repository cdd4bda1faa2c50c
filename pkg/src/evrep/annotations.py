"""Validation, repair and segmentation of face annotations.

Each sample is a timestamped bounding box plus five landmarks in the fixed
order [left-eye, right-eye, nose, left-mouth, right-mouth] (image y grows
downward). The pipeline applies, in order:

1. duplicate timestamps and landmark-count checks,
2. landmarks-inside-box with a bounded box-expansion repair,
3. facial topology rules with a pose-dependent nose constraint,
4. spatiotemporal coherence of landmark vs box motion across neighbours,
5. margin exclusion around failures (+-5 spatiotemporal, +-2 out-of-box),
6. segmentation into clips of passing samples, dropping clips under 1 s.

Samples failing any check are excluded outright; duplicates are all dropped
rather than arbitrating between them.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Sequence

REPAIR_DIAG_FRACTION = 0.10
MOTION_DIAG_FRACTION = 0.20
MARGIN_SPATIOTEMPORAL = 5
MARGIN_OUT_OF_BOX = 2
MIN_CLIP_SECONDS = 1.0

REASONS = ("duplicate_timestamp", "landmark_count", "landmark_outside_box",
           "topology", "spatiotemporal", "margin_exclusion")


class AnnotationError(ValueError):
    pass


@dataclass(frozen=True)
class FaceAnnotation:
    t: int                                   # microseconds
    box: tuple[float, float, float, float]   # x1, y1, x2, y2
    landmarks: tuple[tuple[float, float], ...]  # 0-5 points on ingest

    def __post_init__(self):
        x1, y1, x2, y2 = self.box
        if not (x1 < x2 and y1 < y2):
            raise AnnotationError(f"box {self.box} is not well-ordered")
        if len(self.landmarks) > 5:
            raise AnnotationError(f"at most 5 landmarks allowed, got {len(self.landmarks)}")

    @property
    def diag(self) -> float:
        x1, y1, x2, y2 = self.box
        return math.hypot(x2 - x1, y2 - y1)

    @property
    def box_center(self) -> tuple[float, float]:
        x1, y1, x2, y2 = self.box
        return ((x1 + x2) / 2.0, (y1 + y2) / 2.0)

    def landmark_centroid(self) -> tuple[float, float]:
        n = len(self.landmarks)
        return (sum(p[0] for p in self.landmarks) / n,
                sum(p[1] for p in self.landmarks) / n)


@dataclass
class SampleVerdict:
    index: int
    t: int
    status: str                 # pass | repaired | fail
    reason: str | None = None   # one of REASONS when failed / margin-excluded
    repaired_box: tuple[float, float, float, float] | None = None

    @property
    def excluded(self) -> bool:
        return self.status == "fail"

    @property
    def retained(self) -> bool:
        return self.status in ("pass", "repaired")


@dataclass
class Clip:
    start_index: int
    end_index: int      # exclusive
    start_t: int
    end_t: int
    samples: int


@dataclass
class ValidationReport:
    verdicts: list[SampleVerdict]
    clips: list[Clip]
    frequency_hz: float

    def counts(self) -> dict[str, int]:
        out = {"pass": 0, "repaired": 0, "fail": 0}
        for v in self.verdicts:
            out[v.status] += 1
        return out

    def fail_reasons(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for v in self.verdicts:
            if v.status == "fail" and v.reason:
                out[v.reason] = out.get(v.reason, 0) + 1
        return out


def check_duplicates_and_counts(samples: Sequence[FaceAnnotation]) -> list[str | None]:
    """Per-sample failure reason for duplicate timestamps / short landmark lists."""
    seen: dict[int, int] = {}
    for s in samples:
        seen[s.t] = seen.get(s.t, 0) + 1
    reasons: list[str | None] = []
    for s in samples:
        if seen[s.t] > 1:
            reasons.append("duplicate_timestamp")
        elif len(s.landmarks) != 5:
            reasons.append("landmark_count")
        else:
            reasons.append(None)
    return reasons


def check_landmarks_in_box(sample: FaceAnnotation
                           ) -> tuple[str, tuple[float, float, float, float] | None]:
    """('pass', None) | ('repaired', expanded_box) | ('fail', None).

    Worst per-axis exceedance under 10% of the box diagonal is repaired by
    expanding the box minimally to contain all landmarks; anything larger is
    discarded.
    """
    x1, y1, x2, y2 = sample.box
    exceedance = 0.0
    for lx, ly in sample.landmarks:
        exceedance = max(exceedance, x1 - lx, lx - x2, y1 - ly, ly - y2)
    if exceedance <= 0.0:
        return "pass", None
    if exceedance < REPAIR_DIAG_FRACTION * sample.diag:
        xs = [p[0] for p in sample.landmarks]
        ys = [p[1] for p in sample.landmarks]
        new_box = (min(x1, min(xs)), min(y1, min(ys)), max(x2, max(xs)), max(y2, max(ys)))
        return "repaired", new_box
    return "fail", None


def check_topology(sample: FaceAnnotation) -> bool:
    """Left/right ordering, eyes-above-mouths, pose-gated nose position."""
    (lex, ley), (rex, rey), (nx, ny), (lmx, lmy), (rmx, rmy) = sample.landmarks
    if lex >= rex or lmx >= rmx:
        return False
    if ley >= lmy or rey >= rmy:
        return False
    vertical = abs(ley - lmy) + abs(rey - rmy)
    horizontal = abs(rex - lex) + abs(rmx - lmx)
    if vertical > horizontal:
        # Yaw-dominant pose: nose must sit between eye level and mouth level.
        return (ley + rey) / 2.0 <= ny <= (lmy + rmy) / 2.0
    side_x = (lex, rex, lmx, rmx)
    return min(side_x) <= nx <= max(side_x)


def _effective_box(sample: FaceAnnotation, verdict: SampleVerdict
                   ) -> tuple[float, float, float, float]:
    return verdict.repaired_box if verdict.repaired_box is not None else sample.box


def check_spatiotemporal(prev: FaceAnnotation, curr: FaceAnnotation,
                         prev_box=None, curr_box=None) -> bool:
    """Landmark-centroid motion must track box-center motion within 20% of diag."""
    prev_box = prev_box or prev.box
    curr_box = curr_box or curr.box
    pcx, pcy = (prev_box[0] + prev_box[2]) / 2.0, (prev_box[1] + prev_box[3]) / 2.0
    ccx, ccy = (curr_box[0] + curr_box[2]) / 2.0, (curr_box[1] + curr_box[3]) / 2.0
    plx, ply = prev.landmark_centroid()
    clx, cly = curr.landmark_centroid()
    dlm = (clx - plx, cly - ply)
    dbox = (ccx - pcx, ccy - pcy)
    diff = math.hypot(dlm[0] - dbox[0], dlm[1] - dbox[1])
    diag = math.hypot(curr_box[2] - curr_box[0], curr_box[3] - curr_box[1])
    return diff <= MOTION_DIAG_FRACTION * diag


def apply_margins(verdicts: list[SampleVerdict]) -> list[SampleVerdict]:
    """Exclude neighbours of failures; never downgrades an existing failure."""
    margin_at: set[int] = set()
    for i, v in enumerate(verdicts):
        if v.status != "fail":
            continue
        if v.reason == "spatiotemporal":
            radius = MARGIN_SPATIOTEMPORAL
        elif v.reason == "landmark_outside_box":
            radius = MARGIN_OUT_OF_BOX
        else:
            continue
        lo = max(0, i - radius)
        hi = min(len(verdicts), i + radius + 1)
        margin_at.update(range(lo, hi))
    for i in sorted(margin_at):
        if verdicts[i].status != "fail":
            verdicts[i].status = "fail"
            verdicts[i].reason = "margin_exclusion"
    return verdicts


def segment_clips(verdicts: Sequence[SampleVerdict], frequency_hz: float) -> list[Clip]:
    """Maximal retained runs; runs spanning under one second are dropped."""
    clips: list[Clip] = []
    run_start: int | None = None
    for i, v in enumerate(list(verdicts) + [SampleVerdict(len(verdicts), 0, "fail")]):
        if v.retained and run_start is None:
            run_start = i
        elif not v.retained and run_start is not None:
            n = i - run_start
            if n / frequency_hz >= MIN_CLIP_SECONDS:
                clips.append(Clip(run_start, i, verdicts[run_start].t, verdicts[i - 1].t, n))
            run_start = None
    return clips


def validate_annotations(samples: Sequence[FaceAnnotation],
                         frequency_hz: float = 30.0) -> ValidationReport:
    """Run the full cleaning pipeline over a time-ordered sample list."""
    for a, b in zip(samples, samples[1:]):
        if b.t < a.t:
            raise AnnotationError(f"samples not sorted by t ({a.t} then {b.t})")

    verdicts = [SampleVerdict(i, s.t, "pass") for i, s in enumerate(samples)]

    for v, reason in zip(verdicts, check_duplicates_and_counts(samples)):
        if reason is not None:
            v.status, v.reason = "fail", reason

    for i, s in enumerate(samples):
        if verdicts[i].status == "fail":
            continue
        status, new_box = check_landmarks_in_box(s)
        if status == "fail":
            verdicts[i].status, verdicts[i].reason = "fail", "landmark_outside_box"
        elif status == "repaired":
            verdicts[i].status, verdicts[i].repaired_box = "repaired", new_box

    for i, s in enumerate(samples):
        if verdicts[i].status == "fail":
            continue
        if not check_topology(s):
            verdicts[i].status, verdicts[i].reason = "fail", "topology"
            verdicts[i].repaired_box = None

    prev_i: int | None = None
    for i, s in enumerate(samples):
        if verdicts[i].status == "fail":
            continue
        if prev_i is not None:
            ok = check_spatiotemporal(samples[prev_i], s,
                                      _effective_box(samples[prev_i], verdicts[prev_i]),
                                      _effective_box(s, verdicts[i]))
            if not ok:
                verdicts[i].status, verdicts[i].reason = "fail", "spatiotemporal"
                verdicts[i].repaired_box = None
        prev_i = i

    apply_margins(verdicts)
    clips = segment_clips(verdicts, frequency_hz)
    return ValidationReport(verdicts=verdicts, clips=clips, frequency_hz=frequency_hz)


def interpolate_labels(a: FaceAnnotation, b: FaceAnnotation, t: int) -> FaceAnnotation:
    """Linear interpolation of box corners and landmarks at microsecond t."""
    if a.t >= b.t:
        raise AnnotationError(f"need a.t < b.t, got {a.t} >= {b.t}")
    if not a.t <= t <= b.t:
        raise AnnotationError(f"t={t} outside [{a.t}, {b.t}]")
    if len(a.landmarks) != len(b.landmarks):
        raise AnnotationError("landmark counts differ")
    w = (t - a.t) / (b.t - a.t)

    def lerp(u: float, v: float) -> float:
        return u + (v - u) * w

    box = tuple(lerp(u, v) for u, v in zip(a.box, b.box))
    landmarks = tuple((lerp(p[0], q[0]), lerp(p[1], q[1]))
                      for p, q in zip(a.landmarks, b.landmarks))
    return FaceAnnotation(t=t, box=box, landmarks=landmarks)


def read_annotations_jsonl(path) -> list[FaceAnnotation]:
    samples = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                samples.append(FaceAnnotation(
                    t=int(obj["t"]), box=tuple(float(v) for v in obj["box"]),
                    landmarks=tuple((float(p[0]), float(p[1])) for p in obj.get("landmarks", []))))
            except (KeyError, ValueError, TypeError) as exc:
                raise AnnotationError(f"{path}:{lineno}: {exc}") from None
    return samples


def read_annotations_csv(path) -> list[FaceAnnotation]:
    """Columns t,x1,y1,x2,y2,lx0,ly0,...,lx4,ly4; blank landmark cells are skipped."""
    samples = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                t = int(row[0])
                box = tuple(float(v) for v in row[1:5])
                pts = []
                for k in range(5, min(len(row), 15), 2):
                    if row[k].strip() == "" or row[k + 1].strip() == "":
                        continue
                    pts.append((float(row[k]), float(row[k + 1])))
                samples.append(FaceAnnotation(t=t, box=box, landmarks=tuple(pts)))
            except (ValueError, IndexError) as exc:
                raise AnnotationError(f"{path}:{lineno}: {exc}") from None
    return samples


def write_report_json(report: ValidationReport, path) -> None:
    payload = {
        "frequency_hz": report.frequency_hz,
        "counts": report.counts(),
        "fail_reasons": report.fail_reasons(),
        "verdicts": [
            {"index": v.index, "t": v.t, "status": v.status, "reason": v.reason,
             "repaired_box": list(v.repaired_box) if v.repaired_box else None}
            for v in report.verdicts
        ],
        "clips": [
            {"start_index": c.start_index, "end_index": c.end_index,
             "start_t": c.start_t, "end_t": c.end_t, "samples": c.samples}
            for c in report.clips
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def write_exclusions_csv(report: ValidationReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "t", "reason"])
        for v in report.verdicts:
            if v.status == "fail":
                writer.writerow([v.index, v.t, v.reason])
