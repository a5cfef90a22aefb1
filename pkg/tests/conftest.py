import json

import numpy as np
import pytest

from signcodep.ingest import Frame, Hand, HandSkeleton, BodySkeleton, PersonDetection


def body_array(conf=0.9, **points):
    """(25, 3) body with every keypoint at (500, 300) unless overridden by index=(x, y[, c])."""
    kp = np.zeros((25, 3))
    kp[:, :2] = (500.0, 300.0)
    kp[:, 2] = conf
    for key, value in points.items():
        i = int(key.lstrip("k"))
        kp[i, : len(value)] = value
    return kp


def hand_array(n_valid=21, xy=(400.0, 400.0), conf=0.9):
    kp = np.zeros((21, 3))
    kp[:n_valid, :2] = xy
    kp[:n_valid, 2] = conf
    return kp


def person(body=None, left=None, right=None):
    return PersonDetection(
        BodySkeleton(body_array() if body is None else body),
        None if left is None else HandSkeleton(left, Hand.LEFT),
        None if right is None else HandSkeleton(right, Hand.RIGHT),
    )


def frame(*people, width=1000, height=700, frame_id=0):
    return Frame(frame_id, list(people), width, height)


def frame_doc(n_people=1, hands=True, face=False):
    people = []
    for p in range(n_people):
        entry = {"person_id": [-1], "pose_keypoints_2d": [float(p + i) for i in range(75)]}
        if hands:
            entry["hand_left_keypoints_2d"] = [0.5 * i for i in range(63)]
            entry["hand_right_keypoints_2d"] = [0.25 * i for i in range(63)]
        if face:
            entry["face_keypoints_2d"] = [1.0] * 210
        people.append(entry)
    return json.dumps({"version": 1.3, "people": people})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criteria report their outcome here; printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  [{number}] {title}: {detail}")
