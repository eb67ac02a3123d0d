"""JSON-lines episode logs.

Every line is one tick, written after the transition::

    {"actions": {"<id>": [h, v, c_c, c_r], ...},
     "aircraft": [<aircraft snapshot>, ...],
     "events": {"cannon_shots": [[shooter, target, hit], ...],
                "rocket_launches": [[shooter, target], ...],
                "rocket_hits": [[shooter, target], ...],
                "kills": [[victim, killer], ...],
                "friendly_fire_hits": [[shooter, victim], ...]},
     "options": {"<id>": "attack" | "engage" | "defend"},   # only on option switches
     "rockets": [<rocket snapshot>, ...],
     "tick": <tick after the step>,
     "v": 1}

Keys are sorted and separators compact, so the same episode always produces
the same bytes. Given the scenario config and the logged actions the episode
can be re-simulated and compared line for line with :func:`replay_lines`.
"""

import json

from ..errors import LogIntegrityError
from .types import LowLevelAction, StepEvents
from .world import spawn_scenario

LOG_VERSION = 1


def tick_record(world, actions, events, options=None):
    snap = world.snapshot()
    rec = {
        "v": LOG_VERSION,
        "tick": snap["tick"],
        "actions": {str(k): [a.h, a.v, a.c_c, a.c_r] for k, a in sorted(actions.items())},
        "aircraft": snap["aircraft"],
        "rockets": snap["rockets"],
        "events": events.to_dict(),
    }
    if options:
        rec["options"] = {str(k): v for k, v in sorted(options.items())}
    return rec


def dumps(record):
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


class EpisodeLogger:
    """Collects tick records; ``write`` emits them as JSON lines."""

    def __init__(self):
        self.lines = []

    def record(self, world, actions, events, options=None):
        self.lines.append(dumps(tick_record(world, actions, events, options)))

    def text(self):
        return "".join(line + "\n" for line in self.lines)

    def write(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.text())


def read_log(path):
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LogIntegrityError(f"line {lineno}: {exc}") from None
            if not isinstance(rec, dict) or "tick" not in rec or "events" not in rec:
                raise LogIntegrityError(f"line {lineno}: not a tick record")
            records.append(rec)
    return records


def logged_actions(record):
    return {int(k): LowLevelAction(*v) for k, v in record["actions"].items()}


def logged_events(record):
    return StepEvents.from_dict(record["events"])


def replay_lines(config, records):
    """Re-simulate an episode from its config and logged actions."""
    world = spawn_scenario(config)
    logger = EpisodeLogger()
    for rec in records:
        actions = logged_actions(rec)
        events = world.step(dict(actions))
        logger.record(world, actions, events, rec.get("options"))
    return logger.lines
