"""Location and orientation of a hand, and how the threshold works."""

import math

import numpy as np

from signcodep import FilterConfig, filter_frame
from signcodep.ingest import BodySkeleton, Frame, Hand, HandSkeleton, PersonDetection
from signcodep.phonology import (
    LocationConfig,
    annotate_frame,
    body_anchor_points,
    finger_orientation,
    hand_centroid,
    hand_location,
)

W, H = 1000, 700
print("threshold:", LocationConfig().threshold(W, H), "px")  # 10% of the diagonal

body = np.zeros((25, 3))
body[:, 2] = 0.9
for idx, xy in {0: (500, 150), 1: (500, 250), 2: (400, 260), 5: (600, 260), 8: (500, 550),
                15: (480, 130), 16: (520, 130), 17: (460, 140), 18: (540, 140)}.items():
    body[idx, :2] = xy
anchors = body_anchor_points(BodySkeleton(body))
for cat, pts in anchors.items():
    print(f"  {cat.value:9s}", pts)


def hand_at(centre, angle_deg, length=40):
    kp = np.zeros((21, 3))
    kp[:, :2] = centre
    kp[:, 2] = 0.8
    a = math.radians(angle_deg)
    kp[9, :2] = (centre[0] + length * math.cos(a), centre[1] - length * math.sin(a))  # y grows downwards
    return kp


# fingers pointing up, hand at the neck
h = HandSkeleton(hand_at((505, 255), 90), Hand.RIGHT)
print(hand_centroid(h), finger_orientation(h), hand_location(hand_centroid(h), anchors, W, H))

# sweep the wrist->MCP angle around the compass
for deg in range(0, 360, 30):
    print(deg, finger_orientation(HandSkeleton(hand_at((0, 0), deg), Hand.LEFT)).value, end="  ")
print()

# walk a hand away from the abdomen until it leaves every region
for dx in (0, 60, 120, 122, 123, 200):
    c = (500 + dx, 550)
    print(f"dx={dx:3d}", hand_location(c, anchors, W, H).value)

# whole frame: left hand at the nose, right hand far off to the side
person = PersonDetection(
    BodySkeleton(body),
    HandSkeleton(hand_at((500, 160), 135), Hand.LEFT),
    HandSkeleton(hand_at((900, 600), 270), Hand.RIGHT),
)
frame = Frame(7, [person], W, H)
for a in annotate_frame(frame, filter_frame(frame, FilterConfig()), corpus_id="demo", video_id="v"):
    print(a)
