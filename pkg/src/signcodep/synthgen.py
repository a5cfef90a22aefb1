"""Synthetic keypoint corpora with known (location, orientation) ground truth.

Geometry is expressed in units of the location threshold ``T`` (10% of the
image diagonal by default), so the same template works at any resolution.
The body is a fixed upper-body template centred in the image.  For a target
location the hand centroid is put near one of that category's anchor points,
close enough that after the worst-case jitter it is still nearer to that
category than to any other and within ``T``; neutral targets go to side
positions at least ``1.75 T`` from every anchor.  For a target orientation
the wrist -> middle MCP vector points within a sub-sector of the target
sector that leaves room for jitter.

Jitter is Gaussian with standard deviation ``noise_px``, with each keypoint's
displacement clipped to ``JITTER_CLIP * noise_px``.  Infeasible noise levels
raise :class:`InfeasiblePlacement` instead of producing ambiguous truth.
With ``boundary_stress`` the margins and the clip are dropped, so targets
may land in neighbouring bins (round-trip is then not guaranteed).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ingest
from .ingest import (
    BodySkeleton,
    CorpusEntry,
    CorpusManifest,
    Frame,
    Hand,
    HandSkeleton,
    PersonDetection,
    VideoEntry,
    frame_to_json,
    write_manifest,
)
from .phonology import ANCHOR_INDICES, LOCATIONS, ORIENTATIONS, LocationBin, OrientationBin

JITTER_CLIP = 2.0
DECIMALS = 3
CONFIDENCE = 0.9
THRESHOLD_FRACTION = 0.10

N_ORI, N_LOC = len(ORIENTATIONS), len(LOCATIONS)

# body template, units of T, origin at the neck, image axes (y down).
# The signer faces the camera, so their right side is on the image left.
BODY_TEMPLATE = {
    ingest.NOSE: (0.0, -1.0),
    ingest.NECK: (0.0, 0.0),
    ingest.R_SHOULDER: (-1.4, 0.1),
    3: (-1.6, 1.4),  # right elbow
    4: (-1.5, 2.5),  # right wrist
    ingest.L_SHOULDER: (1.4, 0.1),
    6: (1.6, 1.4),
    7: (1.5, 2.5),
    ingest.MID_HIP: (0.0, 2.6),
    9: (-0.6, 2.6),  # right hip
    12: (0.6, 2.6),  # left hip
    ingest.R_EYE: (-0.35, -1.3),
    ingest.L_EYE: (0.35, -1.3),
    ingest.R_EAR: (-0.8, -1.1),
    ingest.L_EAR: (0.8, -1.1),
}
# neck position: horizontally centred, vertically so the template is centred
NECK_OFFSET = (0.0, -0.65)

NEUTRAL_SPOTS = ((-3.0, 0.8), (3.0, 0.8), (-3.0, 2.0), (3.0, 2.0), (-2.8, -0.9), (2.8, -0.9))
NEUTRAL_RADIUS = 0.25

# hand template in units of the wrist -> middle MCP length; x along the
# finger axis, y across the palm (thumb side negative for a right hand)
HAND_TEMPLATE = np.array(
    [
        (0.0, 0.0),
        (0.3, -0.35), (0.55, -0.6), (0.8, -0.75), (1.0, -0.85),
        (1.0, -0.3), (1.4, -0.35), (1.7, -0.38), (1.95, -0.4),
        (1.0, 0.0), (1.45, 0.0), (1.8, 0.0), (2.1, 0.0),
        (0.95, 0.25), (1.35, 0.28), (1.65, 0.3), (1.9, 0.32),
        (0.85, 0.48), (1.15, 0.55), (1.4, 0.6), (1.6, 0.65),
    ]
)
HAND_LENGTH = 0.4  # wrist -> middle MCP, units of T


class InfeasiblePlacement(ValueError):
    pass


def uniform_distribution() -> np.ndarray:
    return np.full((N_ORI, N_LOC), 1.0 / (N_ORI * N_LOC))


def planted_distribution(orientation, location, p: float) -> np.ndarray:
    """Probability ``p`` on one cell, the rest spread evenly over the other 55."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    dist = np.full((N_ORI, N_LOC), (1.0 - p) / (N_ORI * N_LOC - 1))
    dist[ORIENTATIONS.index(OrientationBin(orientation)), LOCATIONS.index(LocationBin(location))] = p
    return dist


def product_distribution(orientation_probs, location_probs) -> np.ndarray:
    """Independent orientation and location marginals."""
    o = np.asarray(orientation_probs, float)
    l = np.asarray(location_probs, float)
    return np.outer(o / o.sum(), l / l.sum())


def _parse_distribution(value) -> np.ndarray:
    if isinstance(value, str):
        if value != "uniform":
            raise ValueError(f"unknown distribution {value!r}")
        return uniform_distribution()
    if isinstance(value, dict) and "planted" in value:
        ori, loc = value["planted"]["cell"]
        return planted_distribution(ori, loc, float(value["planted"]["p"]))
    if isinstance(value, dict) and "product" in value:
        return product_distribution(value["product"]["orientation"], value["product"]["location"])
    return np.asarray(value, dtype=float)


@dataclass
class SynthSpec:
    seed: int = 0
    frames: int = 1000
    image_width: float = 1000
    image_height: float = 700
    cell_distribution: dict = field(
        default_factory=lambda: {Hand.LEFT: uniform_distribution(), Hand.RIGHT: uniform_distribution()}
    )
    noise_px: float = 0.0
    second_person_rate: float = 0.0
    boundary_stress: bool = False

    def __post_init__(self):
        if not isinstance(self.cell_distribution, dict):
            d = np.asarray(self.cell_distribution, float)
            self.cell_distribution = {Hand.LEFT: d, Hand.RIGHT: d.copy()}
        dists = {}
        for hand, dist in self.cell_distribution.items():
            dist = np.asarray(dist, float)
            if dist.shape != (N_ORI, N_LOC):
                raise ValueError(f"cell distribution must be {N_ORI}x{N_LOC}, got {dist.shape}")
            if (dist < 0).any() or not math.isclose(dist.sum(), 1.0, abs_tol=1e-9):
                raise ValueError("cell distribution must be non-negative and sum to 1")
            dists[Hand(hand)] = dist
        if not dists:
            raise ValueError("at least one hand needs a distribution")
        self.cell_distribution = {h: dists[h] for h in (Hand.LEFT, Hand.RIGHT) if h in dists}
        if self.noise_px < 0:
            raise ValueError("noise_px must be >= 0")
        if self.frames < 0:
            raise ValueError("frames must be >= 0")
        if not (self.image_width > 0 and self.image_height > 0):
            raise ValueError("image size must be positive")
        if not 0.0 <= self.second_person_rate <= 1.0:
            raise ValueError("second_person_rate must lie in [0, 1]")

    @classmethod
    def from_dict(cls, doc: dict) -> "SynthSpec":
        doc = dict(doc)
        dist = doc.pop("cell_distribution", "uniform")
        if isinstance(dist, dict) and set(dist) <= {"left", "right"}:
            dist = {Hand(h): _parse_distribution(v) for h, v in dist.items()}
        else:
            dist = _parse_distribution(dist)
        return cls(cell_distribution=dist, **doc)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "frames": self.frames,
            "image_width": self.image_width,
            "image_height": self.image_height,
            "noise_px": self.noise_px,
            "second_person_rate": self.second_person_rate,
            "boundary_stress": self.boundary_stress,
            "cell_distribution": {h.value: d.tolist() for h, d in self.cell_distribution.items()},
        }

    @property
    def threshold(self) -> float:
        return THRESHOLD_FRACTION * math.hypot(self.image_width, self.image_height)


class _Geometry:
    """Pixel-space template and placement limits for one image size and noise level."""

    def __init__(self, spec: SynthSpec):
        T = spec.threshold
        self.T = T
        self.stress = spec.boundary_stress
        self.noise = spec.noise_px
        self.clip = math.inf if self.stress else JITTER_CLIP * spec.noise_px
        # worst-case displacement of any point, rounding included
        jit = 0.0 if self.stress else self.clip + 10.0 ** -DECIMALS

        neck = np.array([spec.image_width / 2 + NECK_OFFSET[0] * T, spec.image_height / 2 + NECK_OFFSET[1] * T])
        self.body = np.zeros((ingest.N_BODY, 3))
        for idx, (x, y) in BODY_TEMPLATE.items():
            self.body[idx] = (neck[0] + x * T, neck[1] + y * T, CONFIDENCE)

        # anchor points per location category (pixel coords)
        self.anchor_pts = {
            loc: self.body[list(dict.fromkeys(ix)), :2] for loc, ix in ANCHOR_INDICES.items()
        }
        spacing = min(
            float(np.hypot(*(p - q)))
            for a, pa in self.anchor_pts.items()
            for b, pb in self.anchor_pts.items()
            if a != b
            for p in pa
            for q in pb
        )
        # own distance <= r + 2 jit must stay below both T and (spacing - r - 2 jit)
        slack = min(T, spacing / 2) - 2 * jit
        if slack <= 0:
            raise InfeasiblePlacement(
                f"noise {spec.noise_px}px too large for anchor spacing {spacing:.1f}px"
            )
        self.place_radius = 1.3 * T if self.stress else 0.5 * slack

        self.neutral = np.array([(neck[0] + x * T, neck[1] + y * T) for x, y in NEUTRAL_SPOTS])
        all_anchors = np.concatenate(list(self.anchor_pts.values()))
        clearance = min(
            float(np.hypot(*(n - a))) for n in self.neutral for a in all_anchors
        ) - NEUTRAL_RADIUS * T
        if not self.stress and clearance - 2 * jit <= T:
            raise InfeasiblePlacement(f"noise {spec.noise_px}px leaves no neutral space")

        self.hand_len = HAND_LENGTH * T
        if self.stress:
            self.half_sector = 22.5
        else:
            ratio = 2 * jit / self.hand_len
            spare = 22.5 - (math.degrees(math.asin(ratio)) if ratio < 1 else 90.0)
            if spare <= 0:
                raise InfeasiblePlacement(
                    f"noise {spec.noise_px}px too large for a {self.hand_len:.1f}px hand"
                )
            self.half_sector = 0.5 * spare
        shape = HAND_TEMPLATE - HAND_TEMPLATE.mean(axis=0)
        self.hand_shape = shape * self.hand_len

    def centres(self, loc_idx, rng) -> np.ndarray:
        """Pick a centroid target for each location index."""
        n = len(loc_idx)
        out = np.empty((n, 2))
        # draw everything up front so the stream does not depend on the mix of bins
        pick = rng.random(n)
        radius = np.sqrt(rng.random(n))
        angle = rng.random(n) * 2 * np.pi
        for i, li in enumerate(loc_idx):
            loc = LOCATIONS[li]
            if loc is LocationBin.NEUTRAL:
                base = self.neutral[int(pick[i] * len(self.neutral))]
                r = radius[i] * (1.3 * self.T if self.stress else NEUTRAL_RADIUS * self.T)
            else:
                pts = self.anchor_pts[loc]
                base = pts[int(pick[i] * len(pts))]
                r = radius[i] * self.place_radius
            out[i] = base + r * np.array([np.cos(angle[i]), np.sin(angle[i])])
        return out

    def hands(self, centres, ori_idx, side: Hand, rng) -> np.ndarray:
        n = len(centres)
        centre_deg = np.array([ORIENTATIONS[o].angle for o in ori_idx]).reshape(n)
        theta = np.radians(centre_deg + rng.uniform(-self.half_sector, self.half_sector, n))
        # compass angle -> image direction (y flipped)
        u = np.stack([np.cos(theta), -np.sin(theta)], axis=-1)
        v = np.stack([np.sin(theta), np.cos(theta)], axis=-1)
        across = self.hand_shape[:, 1] * (1.0 if side is Hand.RIGHT else -1.0)
        xy = (
            centres[:, None, :]
            + self.hand_shape[None, :, 0, None] * u[:, None, :]
            + across[None, :, None] * v[:, None, :]
        )
        out = np.empty((n, ingest.N_HAND, 3))
        out[..., :2] = xy
        out[..., 2] = CONFIDENCE
        return out

    def jitter(self, points: np.ndarray, rng) -> np.ndarray:
        """Jittered copy of (..., k, 3) keypoints; undetected points stay put."""
        if self.noise == 0:
            return points
        d = rng.normal(0.0, self.noise, points.shape[:-1] + (2,))
        if math.isfinite(self.clip):
            norm = np.hypot(d[..., 0], d[..., 1])
            scale = np.minimum(1.0, self.clip / np.maximum(norm, 1e-300))
            d *= scale[..., None]
        out = points.copy()
        detected = points[..., 2] > 0
        out[..., :2] += np.where(detected[..., None], d, 0.0)
        return out


@dataclass
class SynthBatch:
    """Arrays for ``n`` generated frames.

    ``hands`` is (n, 2, 21, 3) with axis 1 ordered (left, right);
    ``present`` marks generated hands; ``location``/``orientation`` hold the
    true bin indices (-1 for absent hands); ``extra_person`` marks frames that
    carry a second signer.
    """

    bodies: np.ndarray
    hands: np.ndarray
    present: np.ndarray
    location: np.ndarray
    orientation: np.ndarray
    extra_person: np.ndarray
    width: float
    height: float

    def __len__(self):
        return len(self.bodies)

    def frame(self, i: int, frame_id: int | None = None) -> Frame:
        body = BodySkeleton(self.bodies[i])
        hands = [
            HandSkeleton(self.hands[i, k], side) if self.present[i, k] else None
            for k, side in enumerate((Hand.LEFT, Hand.RIGHT))
        ]
        people = [PersonDetection(body, hands[0], hands[1])]
        if self.extra_person[i]:
            shifted = self.bodies[i].copy()
            shifted[:, 0] += 0.3 * self.width
            people.append(PersonDetection(BodySkeleton(shifted)))
        return Frame(i if frame_id is None else frame_id, people, self.width, self.height)

    def frames(self):
        for i in range(len(self)):
            yield self.frame(i)


def render(spec: SynthSpec, cells: dict, rng) -> SynthBatch:
    """Build frames for explicit ``{hand: (location_idx, orientation_idx)}`` targets."""
    geo = _Geometry(spec)
    n = len(next(iter(cells.values()))[0]) if cells else 0
    bodies = np.repeat(geo.body[None], n, axis=0)
    hands = np.zeros((n, 2, ingest.N_HAND, 3))
    present = np.zeros((n, 2), dtype=bool)
    location = np.full((n, 2), -1, dtype=np.int64)
    orientation = np.full((n, 2), -1, dtype=np.int64)
    for k, side in enumerate((Hand.LEFT, Hand.RIGHT)):
        if side not in cells:
            continue
        loc_idx, ori_idx = (np.asarray(a, dtype=np.int64) for a in cells[side])
        centres = geo.centres(loc_idx, rng)
        hands[:, k] = geo.hands(centres, ori_idx, side, rng)
        present[:, k] = True
        location[:, k] = loc_idx
        orientation[:, k] = ori_idx
    bodies = geo.jitter(bodies, rng)
    hands = geo.jitter(hands, rng)
    extra = rng.random(n) < spec.second_person_rate
    return SynthBatch(
        np.round(bodies, DECIMALS),
        np.round(hands, DECIMALS),
        present,
        location,
        orientation,
        extra,
        spec.image_width,
        spec.image_height,
    )


def sample_cells(spec: SynthSpec, rng) -> dict:
    """Draw i.i.d. (location_idx, orientation_idx) per frame for every hand of the spec."""
    out = {}
    for side, dist in spec.cell_distribution.items():
        flat = rng.choice(N_ORI * N_LOC, size=spec.frames, p=dist.ravel() / dist.sum())
        ori, loc = np.divmod(flat, N_LOC)
        out[side] = (loc, ori)
    return out


def generate_batch(spec: SynthSpec) -> SynthBatch:
    rng = np.random.default_rng(spec.seed)
    return render(spec, sample_cells(spec, rng), rng)


def generate_frame(
    location,
    orientation,
    spec: SynthSpec,
    hand: Hand = Hand.RIGHT,
    rng=None,
    frame_id: int = 0,
) -> Frame:
    """A single-signer frame with one hand placed at ``(location, orientation)``."""
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    loc = LOCATIONS.index(LocationBin(location))
    ori = ORIENTATIONS.index(OrientationBin(orientation))
    batch = render(spec, {Hand(hand): ([loc], [ori])}, rng)
    return batch.frame(0, frame_id)


TRUTH_HEADER = ("frame", "hand", "location", "orientation", "extra_person")


def write_video(spec: SynthSpec, frames_dir) -> SynthBatch:
    """Generate ``spec`` and write one keypoint file per frame plus ``truth.tsv`` beside it."""
    frames_dir = Path(frames_dir)
    frames_dir.mkdir(parents=True, exist_ok=True)
    batch = generate_batch(spec)
    width = max(12, len(str(max(len(batch) - 1, 0))))
    for i in range(len(batch)):
        path = frames_dir / f"{i:0{width}d}_keypoints.json"
        path.write_text(frame_to_json(batch.frame(i)))
    rows = ["\t".join(TRUTH_HEADER)]
    for i in range(len(batch)):
        for k, side in enumerate((Hand.LEFT, Hand.RIGHT)):
            if batch.present[i, k]:
                rows.append(
                    f"{i}\t{side.value}\t{LOCATIONS[batch.location[i, k]].value}"
                    f"\t{ORIENTATIONS[batch.orientation[i, k]].value}\t{int(batch.extra_person[i])}"
                )
    (frames_dir.parent / f"{frames_dir.name}.truth.tsv").write_text("\n".join(rows) + "\n")
    return batch


def generate_corpus(spec: SynthSpec, directory, corpus_id: str = "SYN", video_id: str = "video0") -> CorpusManifest:
    """Write one synthetic video and a manifest for it under ``directory``."""
    return generate_corpora({corpus_id: {video_id: spec}}, directory)


def generate_corpora(specs: dict, directory) -> CorpusManifest:
    """Write ``{corpus_id: {video_id: SynthSpec}}`` under ``directory``.

    Frames go to ``directory/<corpus>/<video>/`` and the manifest to
    ``directory/manifest.json``.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    corpora = []
    for corpus_id, videos in specs.items():
        entries = []
        for video_id, spec in videos.items():
            frames_dir = directory / corpus_id / video_id
            write_video(spec, frames_dir)
            entries.append(VideoEntry(video_id, frames_dir, spec.image_width, spec.image_height))
        corpora.append(CorpusEntry(corpus_id, tuple(entries)))
    manifest = CorpusManifest(tuple(corpora))
    write_manifest(manifest, directory / "manifest.json")
    return manifest


def read_spec_file(path) -> dict:
    """Load a synth config: a single spec, or ``{"corpora": {corpus: {video: spec}}}``.

    Always returns the nested ``{corpus: {video: SynthSpec}}`` form; a bare
    spec becomes corpus ``SYN``, video ``video0``.
    """
    doc = json.loads(Path(path).read_text())
    if "corpora" in doc:
        return {
            c: {v: SynthSpec.from_dict(s) for v, s in videos.items()}
            for c, videos in doc["corpora"].items()
        }
    return {"SYN": {"video0": SynthSpec.from_dict(doc)}}
