"""Per-frame quality filter: one signer, visible upper body, at least one usable hand."""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field

from .ingest import MID_HIP, NECK, NOSE, L_SHOULDER, R_SHOULDER, Frame, Hand, N_HAND

DEFAULT_REQUIRED_BODY = frozenset({NOSE, NECK, R_SHOULDER, L_SHOULDER, MID_HIP})


class RejectReason(str, enum.Enum):
    NO_PERSON = "NoPerson"
    MULTIPLE_PEOPLE = "MultiplePeople"
    INSUFFICIENT_BODY = "InsufficientBody"
    NO_USABLE_HAND = "NoUsableHand"


@dataclass(frozen=True)
class FilterConfig:
    min_keypoint_confidence: float = 0.2
    required_body_indices: frozenset = DEFAULT_REQUIRED_BODY
    min_valid_hand_points: int = 11

    def __post_init__(self):
        if not 0.0 <= self.min_keypoint_confidence <= 1.0:
            raise ValueError("min_keypoint_confidence must lie in [0, 1]")
        if not 1 <= self.min_valid_hand_points <= N_HAND:
            raise ValueError(f"min_valid_hand_points must lie in [1, {N_HAND}]")
        object.__setattr__(self, "required_body_indices", frozenset(self.required_body_indices))
        if any(not 0 <= i < 25 for i in self.required_body_indices):
            raise ValueError("required_body_indices must be BODY_25 indices")

    def to_dict(self) -> dict:
        return {
            "min_keypoint_confidence": self.min_keypoint_confidence,
            "required_body_indices": sorted(self.required_body_indices),
            "min_valid_hand_points": self.min_valid_hand_points,
        }


@dataclass(frozen=True)
class FilterVerdict:
    hands: frozenset = frozenset()
    reason: RejectReason | None = None

    def __post_init__(self):
        if (self.reason is None) == (not self.hands):
            raise ValueError("a verdict either accepts some hands or carries a reject reason")

    @property
    def accepted(self) -> bool:
        return self.reason is None

    @classmethod
    def accept(cls, hands) -> "FilterVerdict":
        return cls(hands=frozenset(Hand(h) for h in hands))

    @classmethod
    def reject(cls, reason: RejectReason) -> "FilterVerdict":
        return cls(reason=RejectReason(reason))

    def __str__(self):
        if self.accepted:
            return "Accept(" + ",".join(sorted(h.value for h in self.hands)) + ")"
        return f"Reject({self.reason.value})"


def filter_frame(frame: Frame, config: FilterConfig = FilterConfig()) -> FilterVerdict:
    """Classify one frame. Checks run in a fixed order, so exactly one reason is reported."""
    if not frame.people:
        return FilterVerdict.reject(RejectReason.NO_PERSON)
    if len(frame.people) > 1:
        return FilterVerdict.reject(RejectReason.MULTIPLE_PEOPLE)

    person = frame.people[0]
    thr = config.min_keypoint_confidence
    conf = person.body.confidence
    if any(conf[i] < thr for i in config.required_body_indices):
        return FilterVerdict.reject(RejectReason.INSUFFICIENT_BODY)

    usable = []
    for side in (Hand.LEFT, Hand.RIGHT):
        hand = person.hand(side)
        if hand is None:
            continue
        # undetected points are (0, 0, 0) and must not pass a zero threshold
        c = hand.confidence
        n_valid = int(((c >= thr) & (c > 0)).sum())
        if n_valid >= config.min_valid_hand_points:
            usable.append(side)
    if not usable:
        return FilterVerdict.reject(RejectReason.NO_USABLE_HAND)
    return FilterVerdict.accept(usable)


@dataclass
class FilterReport:
    """Per-video frame counts by verdict. Merges by addition."""

    counts: dict = field(default_factory=dict)

    def add(self, corpus_id: str, video_id: str, verdict: FilterVerdict | str) -> None:
        key = verdict if isinstance(verdict, str) else (
            "Accepted" if verdict.accepted else verdict.reason.value
        )
        self.counts.setdefault((corpus_id, video_id), Counter())[key] += 1

    def add_malformed(self, corpus_id: str, video_id: str, n: int = 1) -> None:
        self.counts.setdefault((corpus_id, video_id), Counter())["Malformed"] += n

    def ensure(self, corpus_id: str, video_id: str) -> None:
        self.counts.setdefault((corpus_id, video_id), Counter())

    def merge(self, other: "FilterReport") -> "FilterReport":
        for key, counter in other.counts.items():
            self.counts.setdefault(key, Counter()).update(counter)
        return self

    COLUMNS = ("Accepted",) + tuple(r.value for r in RejectReason) + ("Malformed",)

    def rows(self):
        """(corpus, video, *counts, total, acceptance) in insertion order."""
        for (corpus_id, video_id), c in self.counts.items():
            values = [c.get(col, 0) for col in self.COLUMNS]
            total = sum(values)
            ratio = values[0] / total if total else 0.0
            yield corpus_id, video_id, values, total, ratio

    def to_records(self) -> list:
        out = []
        for corpus_id, video_id, values, total, ratio in self.rows():
            rec = {"corpus": corpus_id, "video": video_id, "total_files": total}
            rec.update(dict(zip(self.COLUMNS, values)))
            rec["acceptance_ratio"] = ratio
            out.append(rec)
        return out

    def to_text(self) -> str:
        header = ("corpus", "video") + self.COLUMNS + ("total", "accept%")
        lines = [header]
        for corpus_id, video_id, values, total, ratio in self.rows():
            lines.append((corpus_id, video_id, *map(str, values), str(total), f"{100 * ratio:.1f}"))
        widths = [max(len(str(row[i])) for row in lines) for i in range(len(header))]
        return "\n".join(
            "  ".join(str(v).rjust(w) if i >= 2 else str(v).ljust(w) for i, (v, w) in enumerate(zip(row, widths)))
            for row in lines
        ) + "\n"
