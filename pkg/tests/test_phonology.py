import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from signcodep.filtering import FilterVerdict, filter_frame
from signcodep.ingest import BodySkeleton, Hand, HandSkeleton
from signcodep.phonology import (
    LOCATIONS,
    ORIENTATIONS,
    LocationBin,
    LocationConfig,
    MissingAnchor,
    NoValidPoints,
    OrientationBin,
    PhonologicalAnnotation,
    annotate_frame,
    body_anchor_points,
    finger_orientation,
    hand_centroid,
    hand_location,
    read_annotations,
    write_annotations,
)

from conftest import body_array, frame, hand_array, person


def oriented_hand(wrist, mcp, side=Hand.RIGHT, centre=None):
    kp = hand_array(21, xy=centre or wrist)
    kp[0, :2] = wrist
    kp[9, :2] = mcp
    return HandSkeleton(kp, side)


# ── centroid ──


def test_centroid_identity():
    assert hand_centroid(HandSkeleton(hand_array(21, (5, 5)), Hand.LEFT)) == (5.0, 5.0)


def test_centroid_mean():
    kp = hand_array(21, (0, 0))
    kp[20, :2] = (210, 0)
    assert hand_centroid(HandSkeleton(kp, Hand.LEFT)) == pytest.approx((10.0, 0.0))


def test_centroid_ignores_undetected():
    kp = hand_array(21, (4, 4))
    kp[20] = (999, 999, 0.0)
    assert hand_centroid(HandSkeleton(kp, Hand.LEFT), min_conf=0.0) == (4.0, 4.0)


def test_centroid_without_points():
    with pytest.raises(NoValidPoints):
        hand_centroid(HandSkeleton(hand_array(0), Hand.LEFT))


# ── orientation ──


@pytest.mark.parametrize(
    "wrist, mcp, expected",
    [
        ((100, 200), (100, 150), OrientationBin.N),
        ((0, 0), (50, 50), OrientationBin.SE),
        ((0, 0), (100, 0), OrientationBin.E),
        ((0, 0), (-100, 0), OrientationBin.W),
        ((0, 0), (-10, 10), OrientationBin.SW),
        ((0, 0), (-10, -10), OrientationBin.NW),
        ((0, 0), (0, 10), OrientationBin.S),
        ((0, 0), (10, -10), OrientationBin.NE),
    ],
)
def test_orientation_examples(wrist, mcp, expected):
    assert finger_orientation(oriented_hand(wrist, mcp)) is expected


def _at(deg, length=100.0):
    r = math.radians(deg)
    return (math.cos(r) * length, -math.sin(r) * length)


@pytest.mark.parametrize(
    "deg, expected",
    [(22.5, "NE"), (67.5, "N"), (112.5, "NW"), (157.5, "W"), (202.5, "SW"),
     (247.5, "S"), (292.5, "SE"), (337.5, "E"), (-22.5, "E")],
)
def test_sector_lower_bound_is_inclusive(deg, expected):
    assert finger_orientation(oriented_hand((0, 0), _at(deg))).value == expected


def test_orientation_needs_anchors():
    kp = hand_array(21)
    kp[9, 2] = 0.0
    with pytest.raises(MissingAnchor):
        finger_orientation(HandSkeleton(kp, Hand.RIGHT))


@given(st.floats(0, 360, exclude_max=True), st.floats(5, 500))
def test_rotation_advances_one_step(deg, length):
    offset = (deg + 22.5) % 45
    assume(1e-6 < offset < 45 - 1e-6)
    a = finger_orientation(oriented_hand((0, 0), _at(deg, length)))
    b = finger_orientation(oriented_hand((0, 0), _at(deg - 45, length)))  # +45 on screen = clockwise
    assert ORIENTATIONS.index(b) == (ORIENTATIONS.index(a) + 1) % 8


# ── anchors and location ──


def test_anchor_map_full():
    anchors = body_anchor_points(BodySkeleton(body_array()))
    assert set(anchors) == set(LOCATIONS) - {LocationBin.NEUTRAL}
    assert len(anchors[LocationBin.EYES]) == 2 and len(anchors[LocationBin.NECK]) == 1


def test_anchor_map_drops_undetected():
    anchors = body_anchor_points(BodySkeleton(body_array(k17=(0, 0, 0), k18=(0, 0, 0))))
    assert LocationBin.EARS not in anchors
    anchors = body_anchor_points(BodySkeleton(body_array(k16=(0, 0, 0))))
    assert len(anchors[LocationBin.EYES]) == 1


def test_location_at_neck():
    anchors = {LocationBin.NECK: [(500, 300)], LocationBin.NOSE: [(500, 200)]}
    assert hand_location((500, 300), anchors, 1000, 700) is LocationBin.NECK


def test_location_far_from_everything():
    anchors = {LocationBin.NECK: [(500, 300)], LocationBin.NOSE: [(500, 100)]}
    # 200 px from the neck and farther from the nose; threshold is 0.1 * 1220.656 ~ 122.07
    assert hand_location((700, 300), anchors, 1000, 700) is LocationBin.NEUTRAL


def test_location_strict_minimum():
    anchors = {LocationBin.SHOULDER: [(300, 300), (700, 300)], LocationBin.NECK: [(500, 300)]}
    # 30 px from the left shoulder (700, 300), 80 px from the neck... and threshold 122
    centroid = (580 + 0, 300)
    assert hand_location(centroid, anchors, 1000, 700) is LocationBin.NECK
    assert hand_location((670, 300), anchors, 1000, 700) is LocationBin.SHOULDER


def test_threshold_is_inclusive():
    anchors = {LocationBin.NECK: [(0.0, 0.0)]}
    thr = 0.1 * math.hypot(1000, 700)
    assert hand_location((thr, 0.0), anchors, 1000, 700) is LocationBin.NECK
    assert hand_location((thr + 1e-9, 0.0), anchors, 1000, 700) is LocationBin.NEUTRAL


def test_ties_follow_fixed_order():
    anchors = {cat: [(100.0 * i, 0.0)] for i, cat in enumerate(LocationBin) if cat is not LocationBin.NEUTRAL}
    # equidistant between Ears (0) and Eyes (100): Eyes wins
    assert hand_location((50.0, 0.0), anchors, 1000, 700) is LocationBin.EYES
    # between Neck (300) and Shoulder (400): Neck wins
    assert hand_location((350.0, 0.0), anchors, 1000, 700) is LocationBin.NECK


def test_location_needs_anchors():
    with pytest.raises(ValueError):
        hand_location((0, 0), {}, 10, 10)


def test_custom_threshold_fraction():
    anchors = {LocationBin.NECK: [(0.0, 0.0)]}
    assert hand_location((150, 0), anchors, 1000, 700, LocationConfig(0.2)) is LocationBin.NECK
    with pytest.raises(ValueError):
        LocationConfig(0.0)


# ── frame annotation ──


def _body():
    return body_array(k0=(500, 150), k1=(500, 250), k2=(400, 260), k5=(600, 260), k8=(500, 550),
                      k15=(480, 130), k16=(520, 130), k17=(460, 140), k18=(540, 140))


def _signing_hand(centre, up=True):
    kp = hand_array(21, centre)
    kp[0, :2] = centre
    kp[9, :2] = (centre[0], centre[1] - 40 if up else centre[1] + 40)
    return kp


def test_annotate_both_hands():
    f = frame(person(_body(), left=_signing_hand((500, 250)), right=_signing_hand((900, 600), up=False)), frame_id=4)
    got = annotate_frame(f, filter_frame(f), corpus_id="ASL", video_id="halo")
    assert got == [
        PhonologicalAnnotation("ASL", "halo", 4, Hand.LEFT, LocationBin.NECK, OrientationBin.N),
        PhonologicalAnnotation("ASL", "halo", 4, Hand.RIGHT, LocationBin.NEUTRAL, OrientationBin.S),
    ]


def test_annotate_skips_hand_without_wrist():
    left = _signing_hand((500, 250))
    left[0, 2] = 0.0
    f = frame(person(_body(), left=left, right=_signing_hand((500, 250))))
    skips = Counter()
    got = annotate_frame(f, filter_frame(f), skips=skips)
    assert [a.hand for a in got] == [Hand.RIGHT]
    assert skips == {"MissingAnchor": 1}


def test_annotate_both_hands_without_anchors():
    hands = []
    for _ in range(2):
        h = _signing_hand((500, 250))
        h[9, 2] = 0.0
        hands.append(h)
    f = frame(person(_body(), left=hands[0], right=hands[1]))
    skips = Counter()
    assert annotate_frame(f, filter_frame(f), skips=skips) == []
    assert skips["MissingAnchor"] == 2


def test_annotate_rejects_rejected_frames():
    f = frame()
    with pytest.raises(ValueError):
        annotate_frame(f, filter_frame(f))


coord = st.floats(-2000, 2000)


@given(dx=coord, dy=coord, hx=st.floats(0, 1000), hy=st.floats(0, 700), ang=st.floats(0, 360))
def test_translation_invariance(dx, dy, hx, hy, ang):
    body = _body()
    hand = _signing_hand((hx, hy))
    hand[9, :2] = np.array((hx, hy)) + _at(ang, 40)
    f1 = frame(person(body, right=hand))
    b2, h2 = body.copy(), hand.copy()
    b2[:, :2] += (dx, dy)
    h2[:, :2] += (dx, dy)
    f2 = frame(person(b2, right=h2))
    a1 = annotate_frame(f1, FilterVerdict.accept({Hand.RIGHT}))
    a2 = annotate_frame(f2, FilterVerdict.accept({Hand.RIGHT}))
    # ties and exact boundaries can move by one ulp under translation
    assume(abs(((ang + 22.5) % 45)) > 1e-6 and abs(((ang + 22.5) % 45) - 45) > 1e-6)
    thr = 0.1 * math.hypot(1000, 700)
    d = np.hypot(*(body[[0, 1, 2, 5, 8, 15, 16, 17, 18], :2] - hand[:, :2].mean(axis=0)).T)
    assume(np.all(np.abs(d - thr) > 1e-6))
    assume(np.sort(d)[1] - np.sort(d)[0] > 1e-6)
    assert [(a.location, a.orientation) for a in a1] == [(a.location, a.orientation) for a in a2]


@given(s=st.floats(0.05, 20), hx=st.floats(0, 1000), hy=st.floats(0, 700))
def test_location_scale_invariance(s, hx, hy):
    anchors = body_anchor_points(BodySkeleton(_body()))
    scaled = {k: [(x * s, y * s) for x, y in v] for k, v in anchors.items()}
    thr = 0.1 * math.hypot(1000, 700)
    d = sorted(math.dist((hx, hy), p) for pts in anchors.values() for p in pts)
    assume(abs(d[0] - thr) > 1e-6 * thr and d[1] - d[0] > 1e-6)
    assert hand_location((hx, hy), anchors, 1000, 700) is hand_location((hx * s, hy * s), scaled, 1000 * s, 700 * s)


def test_annotation_dump_round_trip(tmp_path):
    anns = [
        PhonologicalAnnotation("ASL", "halo", 0, Hand.LEFT, LocationBin.NECK, OrientationBin.N),
        PhonologicalAnnotation("ASL", "halo", 3, Hand.RIGHT, LocationBin.NEUTRAL, OrientationBin.SW),
    ]
    path = tmp_path / "a.tsv"
    write_annotations(anns, path, {"ASL": ["halo"], "Libras": ["halo", "love"]})
    back, corpora = read_annotations(path)
    assert back == anns
    assert corpora == {"ASL": ["halo"], "Libras": ["halo", "love"]}
    assert path.read_text().splitlines()[2] == "corpus\tvideo\tframe\thand\tlocation\torientation"


def test_annotation_dump_bad_row(tmp_path):
    path = tmp_path / "a.tsv"
    path.write_text("corpus\tvideo\tframe\thand\tlocation\torientation\nA\tv\t0\tleft\tKnee\tN\n")
    with pytest.raises(ValueError, match="a.tsv:2"):
        read_annotations(path)
