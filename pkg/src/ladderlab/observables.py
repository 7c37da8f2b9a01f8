"""Cavity-frequency and occupancy curves from labeled ladders, and resonance features."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .labeling import LabelLadder

PEAK_THRESHOLD = 1e-4
BASELINE_WINDOW = 15
RETURN_WINDOW = 20
MIN_HISTORY = 3
SETTLE_POINTS = 5


class FeatureKind(str, enum.Enum):
    PEAK = "Peak"
    JUMP = "Jump"
    DROP = "Drop"


@dataclass(frozen=True)
class ResonanceFeature:
    kind: FeatureKind
    n: int
    magnitude: float

    def __str__(self):
        return f"{self.kind.value} {self.n} {self.magnitude:.17g}"


@dataclass
class FrequencyCurve:
    n: np.ndarray
    values: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.n)


def ladder_provenance(ladder: LabelLadder) -> dict:
    info = {"p": ladder.p, "method": ladder.method.value}
    info.update(ladder.config)
    return info


def cavity_frequency_curve(ladder: LabelLadder) -> FrequencyCurve:
    """f_n = eps_{p,n+1} - eps_{p,n} for n = 0 .. n_max - 1 (units of omega_c)."""
    if len(ladder) < 2:
        raise ValueError("a frequency curve needs a ladder with at least two entries")
    return FrequencyCurve(np.arange(len(ladder) - 1), np.diff(ladder.energy), ladder_provenance(ladder))


def occupancy_curve(ladder: LabelLadder) -> FrequencyCurve:
    return FrequencyCurve(np.arange(len(ladder)), np.array(ladder.nq, dtype=float), ladder_provenance(ladder))


def detect_features(
    curve: FrequencyCurve,
    peak_threshold: float = PEAK_THRESHOLD,
    baseline_window: int = BASELINE_WINDOW,
    return_window: int = RETURN_WINDOW,
) -> list[ResonanceFeature]:
    """Scan a curve for resonance signatures.

    A point deviating from the trailing median baseline by more than
    ``peak_threshold`` opens an excursion.  If the curve comes back within
    ``return_window`` points it is a Peak, located at the largest deviation.
    Otherwise the baseline has moved.  A move that overshoots the new level
    (the ladder energy itself is discontinuous) is a Jump whatever its sign;
    a monotone move is a Jump upward or a Drop downward.  Jumps and Drops are
    located at the largest single-step change, and repeated detections of
    the same kind while the curve keeps sliding are merged.
    """
    if peak_threshold <= 0:
        raise ValueError("peak_threshold must be positive")
    f = np.asarray(curve.values, dtype=float)
    ns = np.asarray(curve.n)
    features = []
    history_start = 0
    last_persistent = None  # (feature index, curve index)
    i = 0
    while i < len(f):
        hist = f[max(history_start, i - baseline_window):i]
        if len(hist) < MIN_HISTORY:
            i += 1
            continue
        base = float(np.median(hist))
        if abs(f[i] - base) <= peak_threshold:
            i += 1
            continue

        end = min(len(f), i + return_window + 1)
        back = [j for j in range(i + 1, end) if abs(f[j] - base) <= peak_threshold]
        if back:
            r = back[0]
            k = i + int(np.argmax(np.abs(f[i:r] - base)))
            features.append(ResonanceFeature(FeatureKind.PEAK, int(ns[k]), float(abs(f[k] - base))))
            i = r
            continue

        after = f[i + 1:end]
        if len(after) == 0:
            break
        # settled level: tail of the excursion window
        level = float(np.median(after[-SETTLE_POINTS:]))
        shift = level - base
        window = f[i:end]
        lo, hi = min(base, level), max(base, level)
        overshoot = float(max(lo - window.min(), window.max() - hi, 0.0))
        steps = np.abs(np.diff(f[i - 1:end]))
        k = i + int(np.argmax(steps))
        if overshoot > abs(shift):
            kind, magnitude = FeatureKind.JUMP, abs(shift) + overshoot
        else:
            kind = FeatureKind.JUMP if shift > 0 else FeatureKind.DROP
            magnitude = abs(shift)

        merged = False
        if last_persistent is not None:
            idx, at = last_persistent
            prev = features[idx]
            if prev.kind is kind and i - at <= baseline_window:
                features[idx] = ResonanceFeature(kind, prev.n, prev.magnitude + magnitude)
                last_persistent = (idx, i)
                merged = True
        if not merged:
            features.append(ResonanceFeature(kind, int(ns[k]), magnitude))
            last_persistent = (len(features) - 1, i)
        history_start = i + 1
        i += 1
    return features


def features_of_kind(features, kind: FeatureKind | str) -> list[int]:
    kind = FeatureKind(kind)
    return [feat.n for feat in features if feat.kind is kind]


def peak_mask(curve: FrequencyCurve, features, halfwidth: int = 5) -> np.ndarray:
    """True for points farther than ``halfwidth`` from every detected feature."""
    keep = np.ones(len(curve), dtype=bool)
    for feat in features:
        keep &= np.abs(curve.n - feat.n) > halfwidth
    return keep
