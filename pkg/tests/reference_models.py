"""Independent reference implementations used as test oracles.

Everything here recomputes model quantities from their definitions with
deliberately different algorithms and plain scalar math: the position
posterior by exhaustive enumeration over complete hidden-state paths (the
production code runs a recursive forward pass in log space), the networks by
per-unit loops over Python floats (production is vectorized), the Gaussian
update by the textbook scalar posterior formula. Slow and only usable at toy
sizes, which is the point.
"""
from __future__ import annotations

import math
from typing import List, Optional, Sequence, Tuple

import numpy as np


# --- follower: exhaustive path enumeration ---------------------------------


def transition_matrix(
    n: int, self_loop: float, max_skip: int, skip_decay: float
) -> List[List[float]]:
    """Dense position-transition matrix from the model definition."""
    m = [[0.0] * n for _ in range(n)]
    for i in range(n):
        if i == n - 1:
            m[i][i] = 1.0
            continue
        m[i][i] = self_loop
        avail = min(max_skip, n - 1 - i)
        z = 0.0
        for k in range(1, avail + 1):
            z += skip_decay ** (k - 1)
        for k in range(1, avail + 1):
            m[i][i + k] = (1.0 - self_loop) * (skip_decay ** (k - 1)) / z
    return m


def pitch_likelihood(
    score_pitch: int, observed_pitch: int, p_correct: float, decay: float
) -> float:
    if observed_pitch == score_pitch:
        return p_correct
    z = 0.0
    for q in range(128):
        if q != score_pitch:
            z += decay ** abs(q - score_pitch)
    return (1.0 - p_correct) * (decay ** abs(observed_pitch - score_pitch)) / z


def ioi_density(ioi_beats: float, mean_beats: float, std_beats: float) -> float:
    z = (ioi_beats - mean_beats) / std_beats
    if z * z > 1400.0:  # exp underflow; the weight is zero for our purposes
        return 0.0
    return math.exp(-0.5 * z * z) / (std_beats * math.sqrt(2.0 * math.pi))


def enumerate_posterior(
    onsets: Sequence[float],
    pitches: Sequence[int],
    observations: Sequence[Tuple[int, Optional[float], float]],
    p_correct: float = 0.95,
    pitch_decay: float = 0.5,
    self_loop: float = 0.05,
    max_skip: int = 4,
    skip_decay: float = 0.5,
    ioi_std: float = 0.1,
    prior: Optional[Sequence[float]] = None,
) -> np.ndarray:
    """Posterior over positions after all observations, by summing every
    complete hidden path x_1..x_T.

    observations are (pitch, ioi_seconds or None for the first event,
    beat_period) triples. Paths are enumerated as base-n integers whose last
    digit is the final state; per-event weight tensors are rescaled by their
    maximum, which cancels in the normalized posterior but keeps the linear-
    domain products representable.
    """
    n = len(onsets)
    trans = transition_matrix(n, self_loop, max_skip, skip_decay)
    if prior is None:
        start = [1.0 if i == 0 else 0.0 for i in range(n)]
    else:
        start = list(prior)

    def event_lik(state: int, pitch: int) -> float:
        return pitch_likelihood(pitches[state], pitch, p_correct, pitch_decay)

    weights = np.array(start, dtype=float)
    first_pitch, first_ioi, _ = observations[0]
    if first_ioi is None:
        # stream start: no IOI yet, the event reweights the prior in place
        weights = np.array([start[i] * event_lik(i, first_pitch) for i in range(n)])
        remaining = observations[1:]
    else:
        remaining = observations
    peak = weights.max()
    if peak > 0.0:
        weights = weights / peak

    for pitch, ioi_seconds, beat_period in remaining:
        ioi_beats = ioi_seconds / beat_period
        # step[i][j]: move i -> j and emit this event from j
        step = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                if trans[i][j] == 0.0:
                    continue
                mean = 0.0 if i == j else onsets[j] - onsets[i]
                step[i][j] = (
                    trans[i][j]
                    * ioi_density(ioi_beats, mean, ioi_std)
                    * event_lik(j, pitch)
                )
        peak = step.max()
        if peak > 0.0:
            step = step / peak
        last_states = np.arange(weights.size) % n
        weights = (weights[:, None] * step[last_states, :]).reshape(-1)

    by_last_state = weights.reshape(-1, n).sum(axis=0)
    total = by_last_state.sum()
    if total <= 0.0:
        raise ValueError("all paths have zero weight")
    return by_last_state / total


# --- networks: per-unit scalar loops ---------------------------------------


def scalar_rnn_states(
    w_in: np.ndarray,
    w_rec: np.ndarray,
    bias: np.ndarray,
    inputs: Sequence[Sequence[float]],
    reverse: bool = False,
) -> List[List[float]]:
    """One recurrence direction, unit by unit with Python floats."""
    hidden = len(bias)
    order = range(len(inputs) - 1, -1, -1) if reverse else range(len(inputs))
    states: dict = {}
    prev = [0.0] * hidden
    for t in order:
        current = []
        for u in range(hidden):
            acc = float(bias[u])
            for v in range(len(inputs[t])):
                acc += float(w_in[u][v]) * float(inputs[t][v])
            for v in range(hidden):
                acc += float(w_rec[u][v]) * prev[v]
            current.append(math.tanh(acc))
        states[t] = current
        prev = current
    return [states[t] for t in range(len(inputs))]


def scalar_birnn_outputs(ow, basis: np.ndarray) -> np.ndarray:
    """Raw two-channel outputs of the bidirectional net, scalar arithmetic."""
    hf = scalar_rnn_states(ow.w_fw_in, ow.w_fw_rec, ow.b_fw, basis.tolist())
    hb = scalar_rnn_states(ow.w_bw_in, ow.w_bw_rec, ow.b_bw, basis.tolist(), reverse=True)
    hidden = len(ow.b_fw)
    out = []
    for t in range(basis.shape[0]):
        row = []
        for o in range(2):
            acc = float(ow.b_out[o])
            for u in range(hidden):
                acc += float(ow.w_out[o][u]) * hf[t][u]
                acc += float(ow.w_out[o][hidden + u]) * hb[t][u]
            row.append(acc)
        out.append(row)
    return np.array(out)


def scalar_ffnn_outputs(nw, basis: Sequence[float]) -> List[float]:
    """Raw three-channel output of the notewise net, scalar arithmetic."""

    def layer(w, b, x):
        out = []
        for u in range(len(b)):
            acc = float(b[u])
            for v in range(len(x)):
                acc += float(w[u][v]) * float(x[v])
            out.append(math.tanh(acc))
        return out

    h1 = layer(nw.w1, nw.b1, basis)
    h2 = layer(nw.w2, nw.b2, h1)
    y = []
    for o in range(len(nw.b_out)):
        acc = float(nw.b_out[o])
        for u in range(len(h2)):
            acc += float(nw.w_out[o][u]) * h2[u]
        y.append(acc)
    return y


# --- Kalman: closed-form scalar posterior ----------------------------------


def scalar_gaussian_posterior(
    prior_mean: float,
    prior_var: float,
    process_var: float,
    obs_coeff: float,
    obs_var: float,
    observation: float,
) -> Tuple[float, float]:
    """Textbook conjugate update for y = c·x + noise after a random walk step."""
    predicted_var = prior_var + process_var
    posterior_var = 1.0 / (1.0 / predicted_var + obs_coeff * obs_coeff / obs_var)
    posterior_mean = posterior_var * (
        prior_mean / predicted_var + obs_coeff * observation / obs_var
    )
    return posterior_mean, posterior_var


# --- tempo curve: numeric quadrature ---------------------------------------


def quadrature_time(beat_period_at, beat_lo: float, beat_hi: float, steps: int = 200_000) -> float:
    """Seconds to traverse a beat span, by midpoint-rule integration."""
    if beat_hi <= beat_lo:
        return 0.0
    width = (beat_hi - beat_lo) / steps
    acc = 0.0
    for k in range(steps):
        acc += beat_period_at(beat_lo + (k + 0.5) * width)
    return acc * width
