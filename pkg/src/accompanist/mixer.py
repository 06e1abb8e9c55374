"""Expressive-target prediction.

The accompaniment score is encoded as small fixed-order feature vectors; a
bidirectional recurrent net maps the onset-group sequence to the two per-onset
targets (loudness trend, beat-period ratio) and a two-layer feed-forward net
maps each note's features to the three per-note targets (velocity deviation,
timing micro-deviation, articulation). Ratios leave the nets through exp so
zero weights give an exactly neutral performance; bounded deviations leave
through scaled tanh.

Training is out of scope: weights come from a JSON file, a zero (neutral)
initializer, or a seeded random initializer.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .score import AccompanimentScore, ScoreNote

ONSET_BASIS_DIM = 10
NOTE_BASIS_DIM = 5

ONSET_TARGET_CLAMP = (0.25, 4.0)
LOUDNESS_DEV_SCALE = 32.0  # velocity units
TIMING_SCALE = 0.2  # seconds
ARTICULATION_CLAMP = (0.1, 2.0)

BEATS_PER_BAR = 4.0
FEATURE_CAP_BEATS = 4.0
CHORD_SIZE_CAP = 10


class WeightsError(Exception):
    pass


# --- basis functions -------------------------------------------------------


def extract_onset_basis(accomp: AccompanimentScore) -> np.ndarray:
    """One 10-dim feature row per onset group, in score order. All entries in [0, 1]."""
    groups = accomp.onsets
    out = np.zeros((len(groups), ONSET_BASIS_DIM))
    for g, group in enumerate(groups):
        notes = [accomp.note_by_id(i) for i in group.note_ids]
        pitches = [n.pitch for n in notes]
        onset = group.onset_beats
        ioi_prev = onset - groups[g - 1].onset_beats if g > 0 else 0.0
        ioi_next = groups[g + 1].onset_beats - onset if g < len(groups) - 1 else 0.0
        out[g] = [
            float(np.mean(pitches)) / 127.0,
            (max(pitches) - min(pitches)) / 127.0,
            min(len(notes), CHORD_SIZE_CAP) / CHORD_SIZE_CAP,
            onset % 1.0,
            (onset % BEATS_PER_BAR) / BEATS_PER_BAR,
            min(ioi_prev, FEATURE_CAP_BEATS) / FEATURE_CAP_BEATS,
            min(ioi_next, FEATURE_CAP_BEATS) / FEATURE_CAP_BEATS,
            min(float(np.mean([n.duration for n in notes])), FEATURE_CAP_BEATS)
            / FEATURE_CAP_BEATS,
            1.0 if g == 0 else 0.0,
            1.0 if g == len(groups) - 1 else 0.0,
        ]
    return out


def extract_note_basis(note: ScoreNote, chord_pitches: Sequence[int]) -> np.ndarray:
    """5-dim feature vector for one note within its onset chord."""
    span = max(chord_pitches) - min(chord_pitches)
    return np.array(
        [
            note.pitch / 127.0,
            min(note.duration, FEATURE_CAP_BEATS) / FEATURE_CAP_BEATS,
            (note.pitch - min(chord_pitches)) / max(1, span),
            min(len(chord_pitches), CHORD_SIZE_CAP) / CHORD_SIZE_CAP,
            note.onset % 1.0,
        ]
    )


def extract_note_basis_matrix(accomp: AccompanimentScore) -> np.ndarray:
    """Feature rows for every accompaniment note, ordered by (group, position)."""
    rows = []
    for group in accomp.onsets:
        chord_pitches = [accomp.note_by_id(i).pitch for i in group.note_ids]
        for note_id in group.note_ids:
            rows.append(extract_note_basis(accomp.note_by_id(note_id), chord_pitches))
    if not rows:
        return np.zeros((0, NOTE_BASIS_DIM))
    return np.vstack(rows)


# --- weights ---------------------------------------------------------------


@dataclass(frozen=True)
class OnsetwiseWeights:
    w_fw_in: np.ndarray  # H x 10
    w_fw_rec: np.ndarray  # H x H
    b_fw: np.ndarray  # H
    w_bw_in: np.ndarray
    w_bw_rec: np.ndarray
    b_bw: np.ndarray
    w_out: np.ndarray  # 2 x 2H, forward half first
    b_out: np.ndarray  # 2

    @property
    def hidden(self) -> int:
        return self.w_fw_in.shape[0]


@dataclass(frozen=True)
class NotewiseWeights:
    w1: np.ndarray  # H1 x 5
    b1: np.ndarray
    w2: np.ndarray  # H2 x H1
    b2: np.ndarray
    w_out: np.ndarray  # 3 x H2
    b_out: np.ndarray


@dataclass(frozen=True)
class ModelWeights:
    onsetwise: OnsetwiseWeights
    notewise: NotewiseWeights


def _expect_shape(name: str, arr: np.ndarray, shape: Tuple[int, ...]) -> None:
    if arr.shape != shape:
        raise WeightsError(f"array {name!r} has shape {arr.shape}, expected {shape}")


def validate_weights(weights: ModelWeights) -> None:
    ow, nw = weights.onsetwise, weights.notewise
    h = ow.w_fw_in.shape[0]
    _expect_shape("onsetwise.w_fw_in", ow.w_fw_in, (h, ONSET_BASIS_DIM))
    _expect_shape("onsetwise.w_fw_rec", ow.w_fw_rec, (h, h))
    _expect_shape("onsetwise.b_fw", ow.b_fw, (h,))
    _expect_shape("onsetwise.w_bw_in", ow.w_bw_in, (h, ONSET_BASIS_DIM))
    _expect_shape("onsetwise.w_bw_rec", ow.w_bw_rec, (h, h))
    _expect_shape("onsetwise.b_bw", ow.b_bw, (h,))
    _expect_shape("onsetwise.w_out", ow.w_out, (2, 2 * h))
    _expect_shape("onsetwise.b_out", ow.b_out, (2,))
    h1 = nw.w1.shape[0]
    h2 = nw.w2.shape[0]
    _expect_shape("notewise.w1", nw.w1, (h1, NOTE_BASIS_DIM))
    _expect_shape("notewise.b1", nw.b1, (h1,))
    _expect_shape("notewise.w2", nw.w2, (h2, h1))
    _expect_shape("notewise.b2", nw.b2, (h2,))
    _expect_shape("notewise.w_out", nw.w_out, (3, h2))
    _expect_shape("notewise.b_out", nw.b_out, (3,))
    for part, obj in (("onsetwise", ow), ("notewise", nw)):
        for name in vars(obj):
            arr = getattr(obj, name)
            if not np.all(np.isfinite(arr)):
                raise WeightsError(f"array {part}.{name} contains non-finite values")


def zero_weights(hidden: int = 16, hidden1: int = 16, hidden2: int = 16) -> ModelWeights:
    """All-zero (neutral) model: ratios 1, deviations 0."""
    ow = OnsetwiseWeights(
        w_fw_in=np.zeros((hidden, ONSET_BASIS_DIM)),
        w_fw_rec=np.zeros((hidden, hidden)),
        b_fw=np.zeros(hidden),
        w_bw_in=np.zeros((hidden, ONSET_BASIS_DIM)),
        w_bw_rec=np.zeros((hidden, hidden)),
        b_bw=np.zeros(hidden),
        w_out=np.zeros((2, 2 * hidden)),
        b_out=np.zeros(2),
    )
    nw = NotewiseWeights(
        w1=np.zeros((hidden1, NOTE_BASIS_DIM)),
        b1=np.zeros(hidden1),
        w2=np.zeros((hidden2, hidden1)),
        b2=np.zeros(hidden2),
        w_out=np.zeros((3, hidden2)),
        b_out=np.zeros(3),
    )
    return ModelWeights(onsetwise=ow, notewise=nw)


def random_init(
    seed: int, hidden: int = 16, hidden1: int = 16, hidden2: int = 16
) -> ModelWeights:
    """Deterministic random weights, scaled by fan-in."""
    rng = np.random.default_rng(seed)

    def mat(rows: int, cols: int) -> np.ndarray:
        return rng.normal(0.0, 1.0 / math.sqrt(cols), size=(rows, cols))

    ow = OnsetwiseWeights(
        w_fw_in=mat(hidden, ONSET_BASIS_DIM),
        w_fw_rec=mat(hidden, hidden),
        b_fw=rng.normal(0.0, 0.1, size=hidden),
        w_bw_in=mat(hidden, ONSET_BASIS_DIM),
        w_bw_rec=mat(hidden, hidden),
        b_bw=rng.normal(0.0, 0.1, size=hidden),
        w_out=mat(2, 2 * hidden),
        b_out=rng.normal(0.0, 0.1, size=2),
    )
    nw = NotewiseWeights(
        w1=mat(hidden1, NOTE_BASIS_DIM),
        b1=rng.normal(0.0, 0.1, size=hidden1),
        w2=mat(hidden2, hidden1),
        b2=rng.normal(0.0, 0.1, size=hidden2),
        w_out=mat(3, hidden2),
        b_out=rng.normal(0.0, 0.1, size=3),
    )
    weights = ModelWeights(onsetwise=ow, notewise=nw)
    validate_weights(weights)
    return weights


def _array_to_json(arr: np.ndarray) -> dict:
    return {"shape": list(arr.shape), "data": arr.reshape(-1).tolist()}


def _array_from_json(name: str, obj) -> np.ndarray:
    if not isinstance(obj, dict) or "shape" not in obj or "data" not in obj:
        raise WeightsError(f"array {name!r} must be an object with 'shape' and 'data'")
    shape = tuple(obj["shape"])
    data = np.asarray(obj["data"], dtype=float)
    if data.size != int(np.prod(shape)):
        raise WeightsError(
            f"array {name!r}: {data.size} values do not fill shape {list(shape)}"
        )
    return data.reshape(shape)


_ONSETWISE_FIELDS = ("w_fw_in", "w_fw_rec", "b_fw", "w_bw_in", "w_bw_rec", "b_bw", "w_out", "b_out")
_NOTEWISE_FIELDS = ("w1", "b1", "w2", "b2", "w_out", "b_out")


def save_weights(weights: ModelWeights) -> bytes:
    doc = {
        "onsetwise": {k: _array_to_json(getattr(weights.onsetwise, k)) for k in _ONSETWISE_FIELDS},
        "notewise": {k: _array_to_json(getattr(weights.notewise, k)) for k in _NOTEWISE_FIELDS},
    }
    return json.dumps(doc, indent=1, sort_keys=True).encode()


def load_weights(data: bytes) -> ModelWeights:
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise WeightsError(f"weights file is not valid JSON: {exc}") from exc
    for section in ("onsetwise", "notewise"):
        if section not in doc:
            raise WeightsError(f"weights file is missing the {section!r} section")
    ow = OnsetwiseWeights(
        **{k: _array_from_json(f"onsetwise.{k}", doc["onsetwise"].get(k)) for k in _ONSETWISE_FIELDS}
    )
    nw = NotewiseWeights(
        **{k: _array_from_json(f"notewise.{k}", doc["notewise"].get(k)) for k in _NOTEWISE_FIELDS}
    )
    weights = ModelWeights(onsetwise=ow, notewise=nw)
    validate_weights(weights)
    return weights


# --- forward passes --------------------------------------------------------


def birnn_forward(
    ow: OnsetwiseWeights, basis: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Full bidirectional pass over a (T, 10) basis sequence.

    Returns (h_forward, h_backward, y): (T, H), (T, H), (T, 2). Context outside
    the sequence is zero on both ends.
    """
    t_len = basis.shape[0]
    h = ow.hidden
    in_fw = basis @ ow.w_fw_in.T + ow.b_fw
    in_bw = basis @ ow.w_bw_in.T + ow.b_bw
    hf = np.zeros((t_len, h))
    hb = np.zeros((t_len, h))
    prev = np.zeros(h)
    for t in range(t_len):
        prev = np.tanh(in_fw[t] + ow.w_fw_rec @ prev)
        hf[t] = prev
    nxt = np.zeros(h)
    for t in range(t_len - 1, -1, -1):
        nxt = np.tanh(in_bw[t] + ow.w_bw_rec @ nxt)
        hb[t] = nxt
    y = np.concatenate([hf, hb], axis=1) @ ow.w_out.T + ow.b_out
    return hf, hb, y


def predict_onsetwise(weights: ModelWeights, basis: np.ndarray) -> np.ndarray:
    """Per-onset targets, shape (T, 2): columns loudness_trend, bp_ratio.

    The whole sequence is computed at once; the backward recurrence needs it,
    and the accompaniment score is known in advance.
    """
    if basis.shape[0] == 0:
        return np.zeros((0, 2))
    if basis.shape[1] != ONSET_BASIS_DIM:
        raise WeightsError(f"onset basis has dimension {basis.shape[1]}, expected {ONSET_BASIS_DIM}")
    _, _, y = birnn_forward(weights.onsetwise, basis)
    return np.clip(np.exp(y), *ONSET_TARGET_CLAMP)


class NoteTargets(NamedTuple):
    loudness_dev: float  # velocity units, in [-32, 32]
    timing: float  # seconds, in [-0.2, 0.2]
    articulation: float  # duration ratio, in [0.1, 2.0]


def predict_notewise_batch(weights: ModelWeights, basis: np.ndarray) -> np.ndarray:
    """Per-note targets, shape (M, 3): columns loudness_dev, timing, articulation."""
    if basis.shape[0] == 0:
        return np.zeros((0, 3))
    if basis.shape[1] != NOTE_BASIS_DIM:
        raise WeightsError(f"note basis has dimension {basis.shape[1]}, expected {NOTE_BASIS_DIM}")
    nw = weights.notewise
    h1 = np.tanh(basis @ nw.w1.T + nw.b1)
    h2 = np.tanh(h1 @ nw.w2.T + nw.b2)
    y = h2 @ nw.w_out.T + nw.b_out
    out = np.empty_like(y)
    out[:, 0] = LOUDNESS_DEV_SCALE * np.tanh(y[:, 0])
    out[:, 1] = TIMING_SCALE * np.tanh(y[:, 1])
    out[:, 2] = np.clip(np.exp(y[:, 2]), *ARTICULATION_CLAMP)
    return out


def predict_notewise(weights: ModelWeights, basis: np.ndarray) -> NoteTargets:
    row = predict_notewise_batch(weights, basis.reshape(1, -1))[0]
    return NoteTargets(loudness_dev=float(row[0]), timing=float(row[1]), articulation=float(row[2]))


def notewise_raw_output(weights: ModelWeights, basis: np.ndarray) -> np.ndarray:
    """Pre-link network output y, shape (3,); used by the Jacobian check."""
    nw = weights.notewise
    h1 = np.tanh(nw.w1 @ basis + nw.b1)
    h2 = np.tanh(nw.w2 @ h1 + nw.b2)
    return nw.w_out @ h2 + nw.b_out


def notewise_input_jacobian(weights: ModelWeights, basis: np.ndarray) -> np.ndarray:
    """Analytic d y / d basis of the raw (pre-link) notewise output, shape (3, 5)."""
    nw = weights.notewise
    h1 = np.tanh(nw.w1 @ basis + nw.b1)
    h2 = np.tanh(nw.w2 @ h1 + nw.b2)
    j1 = (1.0 - h1**2)[:, None] * nw.w1
    j2 = (1.0 - h2**2)[:, None] * (nw.w2 @ j1)
    return nw.w_out @ j2
