"""Reading per-frame pose keypoint files and corpus manifests.

A frame file is the standard per-frame JSON written by the pose estimator::

    {"version": 1.3,
     "people": [{"pose_keypoints_2d": [x0, y0, c0, x1, ...],      # 25 * 3
                 "hand_left_keypoints_2d": [...],                  # 21 * 3
                 "hand_right_keypoints_2d": [...],                 # 21 * 3
                 "face_keypoints_2d": [...]}]}                     # 70 * 3

Hand and face arrays are optional; an empty list counts as absent.  The
format carries no image size, so width and height come from the manifest.

A manifest is a JSON document::

    {"corpora": [{"id": "ASL",
                  "videos": [{"id": "halo", "frames_dir": "asl/halo",
                              "width": 1280, "height": 720}]}]}

Relative ``frames_dir`` entries resolve against the manifest's directory.
Frame files are the ``*.json`` files of that directory in lexicographic
order; the position in that order is the frame id.
"""

from __future__ import annotations

import enum
import json
import logging
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

N_BODY = 25
N_HAND = 21
N_FACE = 70

# BODY_25 indices used downstream
NOSE, NECK, R_SHOULDER, L_SHOULDER, MID_HIP = 0, 1, 2, 5, 8
R_EYE, L_EYE, R_EAR, L_EAR = 15, 16, 17, 18

# hand model indices
WRIST, MIDDLE_MCP = 0, 9

_ID_PATTERN = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.\-]*$")


class MalformedFile(ValueError):
    """A frame file that cannot be turned into a Frame; the frame is skipped."""


class ManifestError(ValueError):
    pass


class Hand(str, enum.Enum):
    LEFT = "left"
    RIGHT = "right"


class Keypoint2D(NamedTuple):
    x: float
    y: float
    confidence: float

    @property
    def detected(self) -> bool:
        return self.confidence > 0


def _as_keypoints(values, count: int, what: str) -> np.ndarray:
    try:
        arr = np.asarray(values, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise MalformedFile(f"{what}: non-numeric keypoint data") from exc
    if arr.ndim == 2 and arr.shape == (count, 3):
        return arr
    if arr.ndim != 1 or arr.size % 3:
        raise MalformedFile(f"{what}: {arr.size} values is not a list of (x, y, c) triples")
    if arr.size != 3 * count:
        raise MalformedFile(f"{what}: expected {count} keypoints, got {arr.size // 3}")
    return arr.reshape(count, 3)


class _Skeleton:
    keypoints: np.ndarray

    def __len__(self) -> int:
        return len(self.keypoints)

    def __getitem__(self, i: int) -> Keypoint2D:
        x, y, c = self.keypoints[i]
        return Keypoint2D(float(x), float(y), float(c))

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return self._key() == other._key() and np.array_equal(
            self.keypoints, other.keypoints, equal_nan=True
        )

    def _key(self):
        return ()

    @property
    def xy(self) -> np.ndarray:
        return self.keypoints[:, :2]

    @property
    def confidence(self) -> np.ndarray:
        return self.keypoints[:, 2]


class BodySkeleton(_Skeleton):
    """25 body keypoints in BODY_25 order, stored as a (25, 3) array."""

    def __init__(self, keypoints):
        self.keypoints = _as_keypoints(keypoints, N_BODY, "pose_keypoints_2d")

    def __repr__(self):
        return f"BodySkeleton(<{len(self)} keypoints>)"


class HandSkeleton(_Skeleton):
    """21 hand keypoints (0 = wrist, 9 = middle finger MCP) for one side."""

    def __init__(self, keypoints, side: Hand):
        self.side = Hand(side)
        self.keypoints = _as_keypoints(keypoints, N_HAND, f"hand_{self.side.value}_keypoints_2d")

    def _key(self):
        return (self.side,)

    def __repr__(self):
        return f"HandSkeleton({self.side.value}, <{len(self)} keypoints>)"


@dataclass(eq=True)
class PersonDetection:
    body: BodySkeleton
    left_hand: Optional[HandSkeleton] = None
    right_hand: Optional[HandSkeleton] = None
    face: Optional[np.ndarray] = field(default=None, compare=False)

    def hand(self, side: Hand) -> Optional[HandSkeleton]:
        return self.left_hand if Hand(side) is Hand.LEFT else self.right_hand


@dataclass
class Frame:
    frame_id: int
    people: list
    image_width: float
    image_height: float

    def __post_init__(self):
        if not (self.image_width > 0 and self.image_height > 0):
            raise ValueError(
                f"image size must be positive, got {self.image_width}x{self.image_height}"
            )

    @property
    def diagonal(self) -> float:
        return float(np.hypot(self.image_width, self.image_height))


def _optional_array(person: dict, key: str):
    values = person.get(key)
    if values is None or len(values) == 0:
        return None
    return values


def parse_frame_file(data, width: float, height: float, frame_id: int) -> Frame:
    """Parse the raw content of one keypoint file into a :class:`Frame`.

    Raises :class:`MalformedFile` when the content is not valid JSON or a
    keypoint array has the wrong arity.
    """
    try:
        doc = json.loads(data)
    except (ValueError, UnicodeDecodeError) as exc:
        raise MalformedFile(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("people"), list):
        raise MalformedFile("missing top-level 'people' list")

    people = []
    for person in doc["people"]:
        if not isinstance(person, dict) or "pose_keypoints_2d" not in person:
            raise MalformedFile("person entry without pose_keypoints_2d")
        body = BodySkeleton(person["pose_keypoints_2d"])
        left = _optional_array(person, "hand_left_keypoints_2d")
        right = _optional_array(person, "hand_right_keypoints_2d")
        face = _optional_array(person, "face_keypoints_2d")
        people.append(
            PersonDetection(
                body=body,
                left_hand=None if left is None else HandSkeleton(left, Hand.LEFT),
                right_hand=None if right is None else HandSkeleton(right, Hand.RIGHT),
                face=None if face is None else _as_keypoints(face, N_FACE, "face_keypoints_2d"),
            )
        )
    return Frame(frame_id=frame_id, people=people, image_width=width, image_height=height)


def _flat(arr: Optional[np.ndarray]) -> list:
    if arr is None:
        return []
    return [float(v) for v in np.asarray(arr).ravel()]


def frame_to_json(frame: Frame) -> str:
    """Serialize a frame back to the keypoint-file format.

    Floats are written with ``repr`` so finite values survive a parse
    round-trip bit for bit.
    """
    people = []
    for person in frame.people:
        people.append(
            {
                "person_id": [-1],
                "pose_keypoints_2d": _flat(person.body.keypoints),
                "face_keypoints_2d": _flat(person.face),
                "hand_left_keypoints_2d": _flat(
                    None if person.left_hand is None else person.left_hand.keypoints
                ),
                "hand_right_keypoints_2d": _flat(
                    None if person.right_hand is None else person.right_hand.keypoints
                ),
            }
        )
    return json.dumps({"version": 1.3, "people": people}, separators=(",", ":"))


# ── manifests ──────────────────────────────────────────────────────────


@dataclass(frozen=True)
class VideoEntry:
    video_id: str
    frames_dir: Path
    image_width: float
    image_height: float


@dataclass(frozen=True)
class CorpusEntry:
    corpus_id: str
    videos: tuple


@dataclass(frozen=True)
class CorpusManifest:
    corpora: tuple

    def __post_init__(self):
        seen = set()
        for corpus in self.corpora:
            _check_id(corpus.corpus_id, "corpus id")
            if corpus.corpus_id in seen:
                raise ManifestError(f"duplicate corpus id {corpus.corpus_id!r}")
            seen.add(corpus.corpus_id)
            vids = set()
            for video in corpus.videos:
                _check_id(video.video_id, "video id")
                if video.video_id in vids:
                    raise ManifestError(
                        f"duplicate video id {video.video_id!r} in corpus {corpus.corpus_id!r}"
                    )
                vids.add(video.video_id)
                if not (video.image_width > 0 and video.image_height > 0):
                    raise ManifestError(
                        f"video {corpus.corpus_id}/{video.video_id}: width and height must be positive"
                    )

    @property
    def corpus_ids(self) -> list:
        return [c.corpus_id for c in self.corpora]

    def videos(self) -> Iterator[tuple]:
        for corpus in self.corpora:
            for video in corpus.videos:
                yield corpus.corpus_id, video

    def check_directories(self) -> None:
        for corpus_id, video in self.videos():
            if not Path(video.frames_dir).is_dir():
                raise ManifestError(
                    f"frames directory for {corpus_id}/{video.video_id} not found: {video.frames_dir}"
                )

    @classmethod
    def from_dict(cls, doc: dict, base_dir=".") -> "CorpusManifest":
        base_dir = Path(base_dir)
        try:
            corpora = []
            for c in doc["corpora"]:
                videos = []
                for v in c["videos"]:
                    frames_dir = Path(v["frames_dir"])
                    if not frames_dir.is_absolute():
                        frames_dir = base_dir / frames_dir
                    videos.append(
                        VideoEntry(
                            video_id=str(v["id"]),
                            frames_dir=frames_dir,
                            image_width=float(v["width"]),
                            image_height=float(v["height"]),
                        )
                    )
                corpora.append(CorpusEntry(str(c["id"]), tuple(videos)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"invalid manifest structure: {exc!r}") from exc
        return cls(tuple(corpora))

    def to_dict(self, base_dir=None) -> dict:
        corpora = []
        for corpus in self.corpora:
            videos = []
            for v in corpus.videos:
                frames_dir = Path(v.frames_dir)
                if base_dir is not None:
                    frames_dir = Path(os.path.relpath(frames_dir, base_dir))
                videos.append(
                    {
                        "id": v.video_id,
                        "frames_dir": frames_dir.as_posix(),
                        "width": _plain_number(v.image_width),
                        "height": _plain_number(v.image_height),
                    }
                )
            corpora.append({"id": corpus.corpus_id, "videos": videos})
        return {"corpora": corpora}


def _plain_number(v: float):
    return int(v) if float(v).is_integer() else float(v)


def _check_id(value: str, what: str) -> None:
    if not isinstance(value, str) or not _ID_PATTERN.match(value):
        raise ManifestError(f"{what} {value!r} must match {_ID_PATTERN.pattern}")


def read_manifest(path) -> CorpusManifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ManifestError(f"manifest not found: {path}") from exc
    except ValueError as exc:
        raise ManifestError(f"manifest {path} is not valid JSON: {exc}") from exc
    return CorpusManifest.from_dict(doc, base_dir=path.parent)


def write_manifest(manifest: CorpusManifest, path) -> None:
    path = Path(path)
    doc = manifest.to_dict(base_dir=path.parent)
    path.write_text(json.dumps(doc, indent=2) + "\n")


# ── streaming ──────────────────────────────────────────────────────────


@dataclass(frozen=True)
class SkippedFile:
    corpus_id: str
    video_id: str
    path: str
    reason: str


def frame_files(directory) -> list:
    """Frame files of a directory, in frame-id order."""
    return sorted(p for p in Path(directory).iterdir() if p.suffix == ".json" and p.is_file())


def read_frames(
    paths: Sequence, width: float, height: float, first_id: int = 0, on_skip=None
) -> Iterator[Frame]:
    """Parse ``paths`` in order; malformed files go to ``on_skip(path, reason)``."""
    for offset, path in enumerate(paths):
        try:
            frame = parse_frame_file(Path(path).read_bytes(), width, height, first_id + offset)
        except MalformedFile as exc:
            logger.warning("skipping malformed frame file %s: %s", path, exc)
            if on_skip is not None:
                on_skip(path, str(exc))
            continue
        yield frame


def load_corpus(manifest: CorpusManifest, skipped: Optional[list] = None) -> Iterator[tuple]:
    """Stream ``(corpus_id, video_id, frame)`` over every video of a manifest.

    Videos come in manifest order and frames in ascending id within each
    video.  Malformed files are logged and, when ``skipped`` is given,
    recorded there as :class:`SkippedFile`; they never stop the stream.
    Missing frame directories raise :class:`ManifestError` before anything
    is yielded.
    """
    manifest.check_directories()
    return _stream(manifest, skipped)


def _stream(manifest: CorpusManifest, skipped):
    for corpus_id, video in manifest.videos():

        def on_skip(path, reason, _c=corpus_id, _v=video.video_id):
            if skipped is not None:
                skipped.append(SkippedFile(_c, _v, str(path), reason))

        paths = frame_files(video.frames_dir)
        for frame in read_frames(paths, video.image_width, video.image_height, 0, on_skip):
            yield corpus_id, video.video_id, frame
