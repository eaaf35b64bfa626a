"""Motion-profile maneuver detection: Python access to the native toolkit."""

import json

import numpy as np

from . import _mprof
from ._mprof import MprofError

__all__ = [
    "MprofError",
    "bench_strip",
    "build_profile",
    "detect_classic",
    "evaluate",
    "event_to_bbox",
    "f1_score",
    "infer",
    "iou",
    "load_profile",
    "make_dataset",
    "mean_ap",
]

MprofError.code = property(lambda self: self.args[0])

iou = _mprof.iou
mean_ap = _mprof.mean_ap
f1_score = _mprof.f1_score


def event_to_bbox(cls, t_start, t_end, v_x, width, height):
    """Box dict for a labeled event in a width x height profile."""
    return json.loads(_mprof.event_to_bbox(cls, t_start, t_end, v_x, width, height))


def build_profile(manifest, belt="medium", channels=1):
    """Returns (samples, provenance) for the video described by a manifest file."""
    samples, meta = _mprof.build_profile(str(manifest), belt, channels)
    return samples, json.loads(meta)


def load_profile(path):
    """Returns (samples, provenance) of an exported profile."""
    samples, meta = _mprof.load_profile(str(path))
    return samples, json.loads(meta)


def make_dataset(out, count=100, seed=0, width=256, height=256, noise=6.0, position_critical=False):
    """Writes a synthetic dataset and returns its index."""
    return json.loads(_mprof.make_dataset(str(out), count, seed, width, height, noise, position_critical))


def detect_classic(profile, v_x):
    return json.loads(_mprof.detect_classic(np.asarray(profile, dtype=np.uint8), v_x))


def infer(checkpoint, profile, conf=0.2, nms=0.5):
    return json.loads(_mprof.infer(str(checkpoint), np.asarray(profile, dtype=np.uint8), conf, nms))


def evaluate(dets, gts, iou_thresh=0.3, conf_thresh=0.2, classes=(), dataset_id=""):
    """Scores detection records against ground-truth records (lists of dicts)."""
    report = _mprof.evaluate(json.dumps(list(dets)), json.dumps(list(gts)), iou_thresh, conf_thresh,
                             list(classes), dataset_id)
    return json.loads(report)


def bench_strip(width=1280, belt_height=65, channels=1, iterations=1000, seed=0):
    return json.loads(_mprof.bench_strip(width, belt_height, channels, iterations, seed))
