"""Evaluation report files.

Renders one evaluation run into a directory: the JSON report, a per-event
CSV, and two PNG figures (tempo tracking against truth, alignment against
ground truth). The JSON bytes are identical to what the CLI prints, so a
stored report can be diffed against a rerun.
"""
from __future__ import annotations

import csv
import os
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .follower import MATCH, WRONG_NOTE
from .sim import EvalReport, EvalTrace

CSV_COLUMNS = (
    "index",
    "time",
    "pitch",
    "label",
    "map_index",
    "score_index",
    "clean",
    "est_beat_period",
    "true_beat_period",
)


def write_events_csv(path: str, trace: Sequence[EvalTrace]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for i, t in enumerate(trace):
            writer.writerow(
                [
                    i,
                    repr(t.time),
                    t.pitch,
                    t.label,
                    t.map_index,
                    "" if t.score_index is None else t.score_index,
                    int(t.clean),
                    repr(t.est_beat_period),
                    "" if t.true_beat_period is None else repr(t.true_beat_period),
                ]
            )


def plot_tempo(path: str, trace: Sequence[EvalTrace]) -> None:
    fig, ax = plt.subplots(figsize=(8, 4))
    times = [t.time for t in trace]
    ax.plot(times, [t.est_beat_period for t in trace], label="tracked", color="tab:blue")
    truth = [(t.time, t.true_beat_period) for t in trace if t.true_beat_period is not None]
    if truth:
        ax.plot(*zip(*truth), label="true", color="tab:gray", linestyle="--")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("beat period (s)")
    ax.set_title("Tempo tracking")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_alignment(path: str, trace: Sequence[EvalTrace]) -> None:
    fig, ax = plt.subplots(figsize=(8, 4))
    colors = {MATCH: "tab:green", WRONG_NOTE: "tab:orange"}
    for t in trace:
        ax.plot(
            t.time,
            t.map_index,
            marker="o",
            markersize=3,
            linestyle="",
            color=colors.get(t.label, "tab:red"),
        )
    truth = [(t.time, t.score_index) for t in trace if t.score_index is not None]
    if truth:
        ax.plot(*zip(*truth), color="tab:gray", linewidth=0.8, label="ground truth")
        ax.legend()
    ax.set_xlabel("time (s)")
    ax.set_ylabel("score position")
    ax.set_title("Alignment (green match, orange wrong pitch, red insertion)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report_dir(
    directory: str,
    report: EvalReport,
    trace: Sequence[EvalTrace],
    include_timing: bool = False,
) -> None:
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "report.json"), "wb") as fh:
        fh.write(report.to_json(include_timing=include_timing))
    write_events_csv(os.path.join(directory, "events.csv"), trace)
    plot_tempo(os.path.join(directory, "tempo.png"), trace)
    plot_alignment(os.path.join(directory, "alignment.png"), trace)
