"""System-level acceptance scorecard.

One test per gate, in order, each printing a single [PASS]/[FAIL] line so a
log scrape (or `pytest -s`) reads as a checklist. The thresholds here are the
contract for the whole pipeline; the per-module suites explain failures in
finer grain.
"""
import statistics
import time

import numpy as np
import pytest

from accompanist.cli import main
from accompanist.follower import MATCH, FollowerParams, ScoreFollower
from accompanist.mixer import (
    NOTE_BASIS_DIM,
    ONSET_BASIS_DIM,
    birnn_forward,
    notewise_input_jacobian,
    notewise_raw_output,
    random_init,
    save_weights,
)
from accompanist.score import ScoreNote, make_solo_score
from accompanist.session import SessionConfig, run_session
from accompanist.sim import SimConfig, TempoPoint, evaluate
from accompanist.smf import write_score_smf
from accompanist.tempo import TempoParams, TempoState, step

from conftest import accomp_blocks, solo_line
from reference_models import (
    enumerate_posterior,
    scalar_birnn_outputs,
    scalar_ffnn_outputs,
    scalar_gaussian_posterior,
)


def verdict(num: int, text: str, ok: bool, detail: str = "") -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {text}")
    assert ok, detail or text


def clean_sim(**kw) -> SimConfig:
    return SimConfig(timing_jitter_std=0.0, velocity_jitter_std=0.0, **kw)


def noisy_sim(seed: int) -> SimConfig:
    return SimConfig(
        seed=seed,
        timing_jitter_std=0.010,
        p_insert=0.05,
        p_skip=0.05,
        p_wrong_pitch=0.05,
    )


def test_01_follower_matches_exhaustive_enumeration():
    # 50 random scores x 50 random observation streams, posterior compared
    # against summing every complete hidden path
    rng = np.random.default_rng(123)
    started = time.perf_counter()
    worst = 0.0
    cases = 0
    for _ in range(50):
        n = int(rng.integers(2, 9))
        onsets = np.concatenate([[0.0], np.cumsum(rng.uniform(0.25, 2.0, size=n - 1))])
        pitches = [int(p) for p in rng.integers(40, 91, size=n)]
        score = make_solo_score(
            [
                ScoreNote(id=i, pitch=pitches[i], onset=float(onsets[i]),
                          duration=0.25, part="solo")
                for i in range(n)
            ]
        )
        follower = ScoreFollower(score, FollowerParams())
        for _ in range(50):
            length = int(rng.integers(1, 7))
            bp = float(rng.uniform(0.3, 0.8))
            obs = []
            for t in range(length):
                if rng.random() < 0.7:
                    pitch = pitches[int(rng.integers(0, n))]
                else:
                    pitch = int(rng.integers(30, 101))
                ioi = None if t == 0 else float(rng.uniform(0.05, 1.8) * bp)
                obs.append((pitch, ioi, bp))
            state = follower.init_state()
            for pitch, ioi, bp_t in obs:
                state, _ = follower.observe(state, pitch, ioi, bp_t)
            ref = enumerate_posterior(list(onsets), pitches, obs)
            worst = max(worst, float(np.max(np.abs(state.posterior - ref))))
            cases += 1
    elapsed = time.perf_counter() - started
    verdict(
        1,
        "follower posterior matches exhaustive path enumeration "
        f"({cases} cases, max err {worst:.2e}, {elapsed:.2f} s)",
        worst < 1e-9 and elapsed < 10.0,
        f"max abs error {worst:.3e} (need < 1e-9), runtime {elapsed:.2f} s (need < 10 s)",
    )


def test_02_clean_tracking_is_perfect():
    report, _ = evaluate(solo_line(200), clean_sim())
    verdict(
        2,
        f"clean 200-note run: match rate {report.match_rate:.3f}, "
        f"tempo error {report.mean_abs_tempo_error * 100.0:.3f}%",
        report.match_rate == 1.0 and report.mean_abs_tempo_error < 0.005,
        f"match rate {report.match_rate}, tempo error {report.mean_abs_tempo_error}",
    )


def test_03_noisy_tracking_stays_usable():
    score = solo_line(200)
    rates = [evaluate(score, noisy_sim(seed))[0].match_rate for seed in range(20)]
    med = statistics.median(rates)
    verdict(
        3,
        f"median match rate over 20 noisy seeds: {med:.3f}",
        med >= 0.90,
        f"rates {sorted(rates)}",
    )


def test_04_tempo_step_response():
    # 120 -> 90 BPM step at beat 50; the estimate must reach 5% of the new
    # beat period within 8 events played after the step
    score = solo_line(100)
    cfg = clean_sim(tempo_curve=(TempoPoint(0.0, 120.0), TempoPoint(50.0, 90.0)))
    _, trace = evaluate(score, cfg)
    target = 60.0 / 90.0
    post = [
        t for t in trace
        if t.score_index is not None and score.onsets[t.score_index] > 50.0
    ]
    errors = [abs(t.est_beat_period - target) / target for t in post[:8]]
    converged = next((i for i, e in enumerate(errors) if e <= 0.05), None)
    verdict(
        4,
        "beat period within 5% of stepped tempo after "
        f"{'never' if converged is None else converged + 1} of 8 allowed events",
        converged is not None,
        f"relative errors over the first 8 post-step events: {errors}",
    )


def test_05_kalman_scalar_conjugacy():
    # drift pinned at zero collapses the filter to textbook scalar Bayes
    def diag(a, b):
        return np.diag([float(a), float(b)]).copy()

    rng = np.random.default_rng(123)
    worst = 0.0
    for _ in range(1000):
        m = float(rng.uniform(0.3, 0.9))
        v = float(rng.uniform(1e-4, 0.05))
        q = float(rng.uniform(0.0, 1e-3))
        r = float(rng.uniform(1e-4, 1e-2))
        s = float(rng.uniform(0.5, 2.0))
        obs_ioi = float(rng.uniform(0.8, 1.2) * m * s)
        params = TempoParams(process_noise={MATCH: diag(q, 0.0)}, obs_noise={MATCH: r})
        state = TempoState(mean=np.array([m, 0.0]), cov=diag(v, 0.0), regime=MATCH)
        out = step(state, params, obs_ioi, s, MATCH)
        ref_mean, ref_var = scalar_gaussian_posterior(m, v, q, s, r, obs_ioi)
        worst = max(worst, abs(out.mean[0] - ref_mean), abs(out.cov[0][0] - ref_var))
    verdict(
        5,
        f"Kalman scalar subcase matches closed form over 1000 pairs (max err {worst:.2e})",
        worst < 1e-12,
        f"max deviation {worst:.3e} (need < 1e-12)",
    )


def test_06_network_oracles():
    rng = np.random.default_rng(123)
    worst_birnn = 0.0
    for seed in range(100):
        weights = random_init(seed, hidden=int(rng.integers(2, 9)))
        basis = rng.uniform(0.0, 1.0, size=(int(rng.integers(1, 8)), ONSET_BASIS_DIM))
        _, _, y = birnn_forward(weights.onsetwise, basis)
        ref = scalar_birnn_outputs(weights.onsetwise, basis)
        worst_birnn = max(worst_birnn, float(np.max(np.abs(y - ref))))

    worst_ffnn = 0.0
    for seed in range(100):
        weights = random_init(
            seed, hidden1=int(rng.integers(2, 9)), hidden2=int(rng.integers(2, 9))
        )
        phi = rng.uniform(0.0, 1.0, size=NOTE_BASIS_DIM)
        y = notewise_raw_output(weights, phi)
        ref = scalar_ffnn_outputs(weights.notewise, phi)
        worst_ffnn = max(worst_ffnn, float(np.max(np.abs(np.asarray(y) - np.asarray(ref)))))

    eps = 1e-5
    worst_jac = 0.0
    for seed in range(10):
        weights = random_init(seed)
        for _ in range(2):
            phi = rng.uniform(0.1, 0.9, size=NOTE_BASIS_DIM)
            jac = notewise_input_jacobian(weights, phi)
            for j in range(NOTE_BASIS_DIM):
                hi, lo = phi.copy(), phi.copy()
                hi[j] += eps
                lo[j] -= eps
                fd = (
                    notewise_raw_output(weights, hi) - notewise_raw_output(weights, lo)
                ) / (2 * eps)
                rel = np.abs(jac[:, j] - fd) / np.maximum(np.abs(fd), 1e-8)
                worst_jac = max(worst_jac, float(rel.max()))

    verdict(
        6,
        "network forwards match scalar oracles "
        f"(recurrent {worst_birnn:.2e}, feedforward {worst_ffnn:.2e}) "
        f"and the Jacobian matches finite differences ({worst_jac:.2e})",
        worst_birnn < 1e-6 and worst_ffnn < 1e-9 and worst_jac < 1e-4,
        f"birnn {worst_birnn:.3e} (<1e-6), ffnn {worst_ffnn:.3e} (<1e-9), "
        f"jacobian {worst_jac:.3e} (<1e-4)",
    )


def test_07_deadpan_equivalence(score_file):
    # neutral model, clean soloist at the initial tempo: the capture must be
    # the metronomic anchor-based schedule
    path = score_file(16)
    result = run_session(SessionConfig(score_path=path, sim=clean_sim(), clock="virtual"))
    accomp = accomp_blocks(16)
    worst = 0.0
    for ev in result.sink.events:
        expected = 0.5 * accomp.onsets[ev.group_index].onset_beats
        worst = max(worst, abs(ev.time - expected))
    complete = result.emitted_count == len(accomp.notes)
    verdict(
        7,
        f"neutral model reproduces the metronomic schedule (max dev {worst:.2e} s)",
        complete and worst < 1e-3,
        f"emitted {result.emitted_count}/{len(accomp.notes)}, max deviation {worst:.3e} s",
    )


def test_08_scaling_collapse(score_file, tmp_path):
    path = score_file(12)
    wpath = tmp_path / "weights.json"
    wpath.write_bytes(save_weights(random_init(5)))
    targets = ("loudness_trend", "bp", "loudness_dev", "timing", "articulation")

    def rows(result):
        return [(e.pitch, e.velocity, e.time, e.duration) for e in result.sink.events]

    def run(weights=None, scaling=None):
        return rows(
            run_session(
                SessionConfig(
                    score_path=path,
                    weights_path=str(wpath) if weights else None,
                    sim=clean_sim(),
                    clock="virtual",
                    scaling=scaling,
                )
            )
        )

    deadpan = run()
    expressive = run(weights=True)
    zeroed = run(weights=True, scaling={t: 0.0 for t in targets})
    unity = run(weights=True, scaling={t: 1.0 for t in targets})
    verdict(
        8,
        "scaling 0 collapses to the deadpan schedule and scaling 1 to the "
        "unscaled expressive output, both bit-exact",
        zeroed == deadpan and unity == expressive and expressive != deadpan,
        f"zeroed==deadpan: {zeroed == deadpan}, unity==expressive: {unity == expressive}, "
        f"expressive!=deadpan: {expressive != deadpan}",
    )


def test_09_determinism(score_file, tmp_path, capsys):
    path = score_file(10)
    outs = []
    for _ in range(2):
        assert main(["evaluate", "--score", path, "--seed", "7"]) == 0
        outs.append(capsys.readouterr().out)
    captures = []
    for i in range(2):
        cap = tmp_path / f"cap{i}.mid"
        code = main(
            ["play", "--score", path, "--output", f"file:{cap}", "--clock", "virtual"]
        )
        capsys.readouterr()
        assert code == 0
        captures.append(cap.read_bytes())
    verdict(
        9,
        "evaluate reports and virtual-clock captures are run-to-run identical",
        outs[0] == outs[1] and captures[0] == captures[1] and captures[0].startswith(b"MThd"),
        f"report bytes equal: {outs[0] == outs[1]}, capture bytes equal: {captures[0] == captures[1]}",
    )


def test_10_latency_budget(tmp_path):
    path = tmp_path / "long.mid"
    path.write_bytes(write_score_smf(solo_line(500), accomp_blocks(500)))
    result = run_session(
        SessionConfig(score_path=str(path), sim=clean_sim(), clock="virtual")
    )
    assert len(result.latencies) == 500
    p95 = float(np.percentile(result.latencies, 95.0))
    verdict(
        10,
        f"p95 per-event pipeline latency {p95 * 1000.0:.2f} ms on a 500-note score",
        p95 <= 0.005,
        f"p95 latency {p95 * 1000.0:.3f} ms (need <= 5 ms)",
    )
