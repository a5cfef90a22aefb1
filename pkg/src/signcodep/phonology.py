"""Hand location and extended-finger orientation from 2D keypoints.

Orientation is the compass direction of the wrist -> middle-finger MCP
vector, with the image y axis flipped so North is up on screen, quantized
into eight half-open 45 degree sectors centred on N, NE, ..., NW.

Location is the body category (ears, eyes, nose, neck, shoulder, abdomen)
closest to the hand centroid.  Categories with a left and a right point use
the nearer of the two.  A hand farther than ``threshold_fraction`` of the
image diagonal from every category is in neutral signing space.

The array functions (``orientation_index``, ``location_index``,
``annotate_arrays``) carry the geometry; the per-object functions wrap them.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import ingest
from .filtering import FilterConfig, FilterVerdict
from .ingest import BodySkeleton, Frame, Hand, HandSkeleton


class OrientationBin(str, enum.Enum):
    N = "N"
    NE = "NE"
    E = "E"
    SE = "SE"
    S = "S"
    SW = "SW"
    W = "W"
    NW = "NW"

    @property
    def angle(self) -> float:
        """Sector centre in degrees, counter-clockwise from East."""
        return _ORI_CENTRES[self]


class LocationBin(str, enum.Enum):
    EARS = "Ears"
    EYES = "Eyes"
    NOSE = "Nose"
    NECK = "Neck"
    SHOULDER = "Shoulder"
    ABDOMEN = "Abdomen"
    NEUTRAL = "NeutralSpace"


ORIENTATIONS = tuple(OrientationBin)
LOCATIONS = tuple(LocationBin)

_ORI_CENTRES = {
    OrientationBin.E: 0.0,
    OrientationBin.NE: 45.0,
    OrientationBin.N: 90.0,
    OrientationBin.NW: 135.0,
    OrientationBin.W: 180.0,
    OrientationBin.SW: 225.0,
    OrientationBin.S: 270.0,
    OrientationBin.SE: 315.0,
}
# sector k = floor((theta + 22.5) / 45) mod 8, counter-clockwise from E
_SECTOR_TO_ORI = np.array(
    [ORIENTATIONS.index(OrientationBin(b)) for b in ("E", "NE", "N", "NW", "W", "SW", "S", "SE")]
)

# Category search order doubles as the tie-break: face parts before broad regions.
ANCHOR_ORDER = (
    LocationBin.EYES,
    LocationBin.EARS,
    LocationBin.NOSE,
    LocationBin.NECK,
    LocationBin.SHOULDER,
    LocationBin.ABDOMEN,
)
ANCHOR_INDICES = {
    LocationBin.EYES: (ingest.R_EYE, ingest.L_EYE),
    LocationBin.EARS: (ingest.R_EAR, ingest.L_EAR),
    LocationBin.NOSE: (ingest.NOSE,),
    LocationBin.NECK: (ingest.NECK,),
    LocationBin.SHOULDER: (ingest.R_SHOULDER, ingest.L_SHOULDER),
    LocationBin.ABDOMEN: (ingest.MID_HIP,),
}
# (6, 2) body index table; single-point categories repeat their index
_ANCHOR_TABLE = np.array([(ix * 2)[:2] for ix in (ANCHOR_INDICES[c] for c in ANCHOR_ORDER)])
_ANCHOR_TO_LOC = np.array([LOCATIONS.index(c) for c in ANCHOR_ORDER])
NEUTRAL_INDEX = LOCATIONS.index(LocationBin.NEUTRAL)

# Angles are snapped to this many decimals of a degree before binning, so a
# vector built at exactly 22.5 degrees lands on the boundary rather than a ulp below it.
_ANGLE_DECIMALS = 9


class NoValidPoints(ValueError):
    pass


class MissingAnchor(ValueError):
    pass


@dataclass(frozen=True)
class LocationConfig:
    threshold_fraction: float = 0.10

    def __post_init__(self):
        if not 0.0 < self.threshold_fraction < 1.0:
            raise ValueError("threshold_fraction must lie in (0, 1)")

    def threshold(self, width: float, height: float) -> float:
        return self.threshold_fraction * float(np.hypot(width, height))


@dataclass(frozen=True, order=True)
class PhonologicalAnnotation:
    corpus_id: str
    video_id: str
    frame_id: int
    hand: Hand
    location: LocationBin
    orientation: OrientationBin


# ── array core ─────────────────────────────────────────────────────────


def compass_angle(dx, dy):
    """Angle in degrees in [0, 360) of image-space vectors, North = screen up."""
    theta = np.degrees(np.arctan2(-np.asarray(dy, float), np.asarray(dx, float)))
    theta = np.round(np.mod(theta, 360.0), _ANGLE_DECIMALS)
    return np.where(theta >= 360.0, theta - 360.0, theta)


def orientation_index(dx, dy) -> np.ndarray:
    """Index into ORIENTATIONS for image-space wrist -> MCP vectors."""
    sector = np.floor((compass_angle(dx, dy) + 22.5) / 45.0).astype(np.int64) % 8
    return _SECTOR_TO_ORI[sector]


def valid_mask(conf, min_conf: float) -> np.ndarray:
    conf = np.asarray(conf)
    return (conf >= min_conf) & (conf > 0)


def centroids(hands: np.ndarray, min_conf: float):
    """Mean (x, y) of the valid points of each hand in an (n, 21, 3) array.

    Returns ``(points (n, 2), n_valid (n,))``; rows with no valid point are NaN.
    """
    hands = np.asarray(hands, dtype=np.float64)
    w = valid_mask(hands[..., 2], min_conf)
    n = w.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        pts = (hands[..., :2] * w[..., None]).sum(axis=-2) / n[..., None]
    return pts, n


def anchor_arrays(bodies: np.ndarray, min_conf: float):
    """Anchor points (n, 6, 2, 2) and validity (n, 6, 2) in ANCHOR_ORDER."""
    bodies = np.asarray(bodies, dtype=np.float64)
    sel = bodies[..., _ANCHOR_TABLE, :]
    return sel[..., :2], valid_mask(sel[..., 2], min_conf)


def location_index(centroid, anchor_pts, anchor_valid, threshold) -> np.ndarray:
    """Index into LOCATIONS for each centroid.

    ``centroid`` is (n, 2), ``anchor_pts`` (n, 6, k, 2), ``anchor_valid``
    (n, 6, k), ``threshold`` scalar or (n,).  The nearest category wins,
    ties going to the earlier entry of ANCHOR_ORDER; beyond the threshold
    (strictly) the hand is neutral.
    """
    centroid = np.asarray(centroid, dtype=np.float64)
    diff = anchor_pts - centroid[..., None, None, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    dist = np.where(anchor_valid, dist, np.inf).min(axis=-1)
    best = np.argmin(dist, axis=-1)
    best_dist = np.take_along_axis(dist, best[..., None], axis=-1)[..., 0]
    loc = _ANCHOR_TO_LOC[best]
    return np.where(best_dist > threshold, NEUTRAL_INDEX, loc)


# failure codes from annotate_arrays
OK, FAIL_NO_POINTS, FAIL_ANCHOR, FAIL_NO_BODY = 0, 1, 2, 3
FAILURE_NAMES = {FAIL_NO_POINTS: "NoValidPoints", FAIL_ANCHOR: "MissingAnchor", FAIL_NO_BODY: "NoBodyAnchors"}


def annotate_arrays(hands, bodies, width, height, min_conf=0.2, threshold_fraction=0.10):
    """Bin many hands at once.

    ``hands`` (n, 21, 3) and ``bodies`` (n, 25, 3) pair each hand with its
    signer; ``width``/``height`` are scalars or (n,).  Returns
    ``(location_idx, orientation_idx, status)`` where status is OK or a
    failure code; bins of failed rows are meaningless.
    """
    hands = np.asarray(hands, dtype=np.float64)
    bodies = np.asarray(bodies, dtype=np.float64)
    cent, n_valid = centroids(hands, min_conf)
    pts, ok_pts = anchor_arrays(bodies, min_conf)
    thr = threshold_fraction * np.hypot(width, height)
    loc = location_index(np.nan_to_num(cent), pts, ok_pts, thr)

    anchors = valid_mask(hands[:, [ingest.WRIST, ingest.MIDDLE_MCP], 2], min_conf)
    vec = hands[:, ingest.MIDDLE_MCP, :2] - hands[:, ingest.WRIST, :2]
    ori = orientation_index(vec[:, 0], vec[:, 1])

    status = np.full(len(hands), OK, dtype=np.int64)
    status[~ok_pts.any(axis=(-1, -2))] = FAIL_NO_BODY
    status[~anchors.all(axis=-1)] = FAIL_ANCHOR
    status[n_valid == 0] = FAIL_NO_POINTS
    return loc, ori, status


# ── per-object API ─────────────────────────────────────────────────────


def hand_centroid(hand: HandSkeleton, min_conf: float = 0.2) -> tuple:
    pts, n = centroids(hand.keypoints[None], min_conf)
    if n[0] == 0:
        raise NoValidPoints(f"{hand.side.value} hand has no keypoint with confidence >= {min_conf}")
    return float(pts[0, 0]), float(pts[0, 1])


def finger_orientation(hand: HandSkeleton, min_conf: float = 0.2) -> OrientationBin:
    kp = hand.keypoints
    if not valid_mask(kp[[ingest.WRIST, ingest.MIDDLE_MCP], 2], min_conf).all():
        raise MissingAnchor(f"{hand.side.value} hand: wrist or middle MCP undetected")
    dx, dy = kp[ingest.MIDDLE_MCP, :2] - kp[ingest.WRIST, :2]
    return ORIENTATIONS[int(orientation_index(dx, dy))]


def body_anchor_points(body: BodySkeleton, min_conf: float = 0.2) -> dict:
    """Detected anchor points per location category (categories with none are absent)."""
    out = {}
    kp = body.keypoints
    for cat in ANCHOR_ORDER:
        pts = [
            (float(kp[i, 0]), float(kp[i, 1]))
            for i in ANCHOR_INDICES[cat]
            if valid_mask(kp[i, 2], min_conf)
        ]
        if pts:
            out[cat] = pts
    return out


def hand_location(
    centroid,
    anchors: Mapping,
    image_width: float,
    image_height: float,
    cfg: LocationConfig = LocationConfig(),
) -> LocationBin:
    if not anchors:
        raise ValueError("no body anchors to locate the hand against")
    k = max(len(v) for v in anchors.values())
    pts = np.zeros((1, len(ANCHOR_ORDER), k, 2))
    ok = np.zeros((1, len(ANCHOR_ORDER), k), dtype=bool)
    for i, cat in enumerate(ANCHOR_ORDER):
        for j, p in enumerate(anchors.get(cat, ())):
            pts[0, i, j] = p
            ok[0, i, j] = True
    thr = cfg.threshold(image_width, image_height)
    return LOCATIONS[int(location_index(np.asarray([centroid], float), pts, ok, thr)[0])]


def annotate_frame(
    frame: Frame,
    verdict: FilterVerdict,
    filter_cfg: FilterConfig = FilterConfig(),
    location_cfg: LocationConfig = LocationConfig(),
    corpus_id: str = "",
    video_id: str = "",
    skips: Counter | None = None,
) -> list:
    """Annotations for the usable hands of an accepted frame (left before right).

    Hands whose centroid or orientation anchors are missing are skipped and
    counted in ``skips`` by failure name.
    """
    if not verdict.accepted:
        raise ValueError("annotate_frame needs an accepted frame")
    person = frame.people[0]
    sides = [s for s in (Hand.LEFT, Hand.RIGHT) if s in verdict.hands]
    if not sides:
        return []
    hands = np.stack([person.hand(s).keypoints for s in sides])
    bodies = np.broadcast_to(person.body.keypoints, (len(sides), ingest.N_BODY, 3))
    loc, ori, status = annotate_arrays(
        hands,
        bodies,
        frame.image_width,
        frame.image_height,
        filter_cfg.min_keypoint_confidence,
        location_cfg.threshold_fraction,
    )
    out = []
    for i, side in enumerate(sides):
        if status[i] != OK:
            if skips is not None:
                skips[FAILURE_NAMES[int(status[i])]] += 1
            continue
        out.append(
            PhonologicalAnnotation(
                corpus_id, video_id, frame.frame_id, side, LOCATIONS[loc[i]], ORIENTATIONS[ori[i]]
            )
        )
    return out


# ── annotation dump ────────────────────────────────────────────────────

DUMP_HEADER = ("corpus", "video", "frame", "hand", "location", "orientation")


def write_annotations(annotations, path, corpora=None) -> None:
    """Tab-separated dump, one row per annotation.

    ``corpora`` maps corpus id -> video ids; it is written as ``# corpus:``
    comment lines so corpora and videos without annotations survive a
    round trip through :func:`read_annotations`.
    """
    lines = []
    for corpus_id, videos in (corpora or {}).items():
        lines.append(f"# corpus: {corpus_id}: " + ",".join(videos))
    lines.append("\t".join(DUMP_HEADER))
    for a in annotations:
        lines.append(
            f"{a.corpus_id}\t{a.video_id}\t{a.frame_id}\t{a.hand.value}\t{a.location.value}\t{a.orientation.value}"
        )
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_annotations(path):
    """Inverse of :func:`write_annotations`: returns ``(annotations, corpora)``."""
    annotations, corpora, header_seen = [], {}, False
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith("# corpus:"):
                    corpus_id, _, videos = line[len("# corpus:"):].strip().partition(":")
                    corpora[corpus_id.strip()] = [v for v in videos.strip().split(",") if v]
                continue
            fields = line.split("\t")
            if not header_seen:
                if tuple(fields) != DUMP_HEADER:
                    raise ValueError(f"{path}:{lineno}: unexpected header {fields}")
                header_seen = True
                continue
            if len(fields) != len(DUMP_HEADER):
                raise ValueError(f"{path}:{lineno}: expected {len(DUMP_HEADER)} fields")
            c, v, f, h, loc, ori = fields
            try:
                annotations.append(
                    PhonologicalAnnotation(c, v, int(f), Hand(h), LocationBin(loc), OrientationBin(ori))
                )
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    for a in annotations:
        videos = corpora.setdefault(a.corpus_id, [])
        if a.video_id not in videos:
            videos.append(a.video_id)
    return annotations, corpora
