"""Parsing one keypoint file and running the frame filter on it."""

import json

import numpy as np

from signcodep import FilterConfig, filter_frame, parse_frame_file

# a hand-made frame: one person, body points spread around a neck at (320, 200)
body = np.zeros((25, 3))
body[:, :2] = (320, 200)
body[:, 2] = 0.9
body[0] = (320, 150, 0.95)  # nose
body[8] = (320, 380, 0.80)  # mid-hip

left = np.zeros((21, 3))
left[:, :2] = (260, 260)
left[:, 2] = 0.7

right = left.copy()
right[:15, 2] = 0.05  # mostly occluded: only 6 of 21 points survive

doc = {
    "version": 1.3,
    "people": [{
        "pose_keypoints_2d": body.ravel().tolist(),
        "hand_left_keypoints_2d": left.ravel().tolist(),
        "hand_right_keypoints_2d": right.ravel().tolist(),
    }],
}

frame = parse_frame_file(json.dumps(doc), width=640, height=480, frame_id=0)
print(len(frame.people), "person,", "diagonal", round(frame.diagonal, 1), "px")
print(frame.people[0].body[0])  # Keypoint2D(x, y, confidence)

verdict = filter_frame(frame)
print("default filter:", verdict)

# a looser hand rule lets the right hand through too
print("5 points per hand:", filter_frame(frame, FilterConfig(min_valid_hand_points=5)))

# a second signer rejects the whole frame
doc["people"].append(doc["people"][0])
print("two people:", filter_frame(parse_frame_file(json.dumps(doc), 640, 480, 1)))

# dropping the neck
doc["people"] = doc["people"][:1]
doc["people"][0]["pose_keypoints_2d"][3 * 1 + 2] = 0.0
print("no neck:", filter_frame(parse_frame_file(json.dumps(doc), 640, 480, 2)))
