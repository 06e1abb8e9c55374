"""Real-time expressive accompaniment.

Follows a soloist through a known score with a probabilistic position
tracker, estimates tempo with a switching linear-Gaussian filter, predicts
expressive targets with small neural nets, and schedules accompaniment
events against a virtual or realtime clock, with a WebSocket telemetry and
control channel for a monitoring UI.
"""
from .engine import AccompanimentEngine, ScalingControls, ScheduledEvent, apply_scaling
from .follower import (
    INSERTION,
    MATCH,
    WRONG_NOTE,
    AlignmentEvent,
    FollowerParams,
    ScoreFollower,
)
from .mixer import (
    ModelWeights,
    load_weights,
    random_init,
    save_weights,
    zero_weights,
)
from .score import (
    AccompanimentScore,
    PerformedNote,
    ScoreNote,
    SoloScore,
    group_onsets,
    make_solo_score,
)
from .sim import EvalReport, SimConfig, TempoCurve, TempoPoint, evaluate, simulate
from .smf import parse_smf, write_capture_smf, write_score_smf
from .session import SessionConfig, SessionResult, run_session
from .tempo import TempoParams, TempoState

__version__ = "0.1.0"

__all__ = [
    "AccompanimentEngine",
    "AccompanimentScore",
    "AlignmentEvent",
    "EvalReport",
    "FollowerParams",
    "INSERTION",
    "MATCH",
    "ModelWeights",
    "PerformedNote",
    "ScalingControls",
    "ScheduledEvent",
    "ScoreFollower",
    "ScoreNote",
    "SessionConfig",
    "SessionResult",
    "SimConfig",
    "SoloScore",
    "TempoCurve",
    "TempoParams",
    "TempoPoint",
    "TempoState",
    "WRONG_NOTE",
    "apply_scaling",
    "evaluate",
    "group_onsets",
    "load_weights",
    "make_solo_score",
    "parse_smf",
    "random_init",
    "run_session",
    "save_weights",
    "simulate",
    "write_capture_smf",
    "write_score_smf",
    "zero_weights",
]
