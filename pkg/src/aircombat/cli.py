"""Command line: training, evaluation, explanation sweeps, rendering and replay.

Exit codes: 0 success, 2 configuration or usage error, 3 numerical
divergence, 4 missing artifact.
"""

import argparse
import json
import os
import sys
import time

from .errors import AircombatError, InvalidConfigError, InvalidInputError, MissingArtifactError

OUT_ENV = "AIRCOMBAT_OUT"
EXIT_OK, EXIT_USAGE, EXIT_DIVERGED, EXIT_MISSING = 0, 2, 3, 4


class UsageError(InvalidConfigError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _config(args):
    from .training.config import RunConfig, load_run_config
    cfg = load_run_config(args.config) if args.config else RunConfig().validate()
    return cfg


def _out_dir(args, cfg):
    out = args.out or os.environ.get(OUT_ENV) or cfg.output_dir
    os.makedirs(out, exist_ok=True)
    return out


def _write_json(path, data):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(data, sort_keys=True, indent=1) + "\n")


def _write_meta(out_dir, name, args):
    """Timestamps and the command line go to a sidecar so artifacts stay byte-stable."""
    _write_json(os.path.join(out_dir, f"{name}.meta.json"),
                {"argv": sys.argv[1:], "command": args.command,
                 "finished": time.strftime("%Y-%m-%dT%H:%M:%S%z")})


def load_controllers(directory):
    """The three frozen controllers of ``directory``, re-linked to one trunk."""
    from .engine.options import MODES
    from .policy import load_checkpoint, share_trunks
    nets = {}
    for mode in MODES:
        path = os.path.join(directory, f"{mode}.ckpt")
        if not os.path.exists(path):
            raise MissingArtifactError(f"missing controller checkpoint {path}")
        net = load_checkpoint(path, expect_role=mode)
        net.frozen = True
        nets[mode] = net
    share_trunks(list(nets.values()))
    return nets


def load_existing_controllers(directory, exclude=None):
    """Whichever controllers ``directory`` already holds (unfrozen), keyed by mode."""
    from .engine.options import MODES
    from .policy import load_checkpoint
    if not os.path.isdir(directory):
        raise MissingArtifactError(f"missing controller directory {directory}")
    return {mode: load_checkpoint(os.path.join(directory, f"{mode}.ckpt"), expect_role=mode)
            for mode in MODES if mode != exclude and os.path.exists(os.path.join(directory, f"{mode}.ckpt"))}


def load_commander(path, m=None):
    from .policy import load_checkpoint
    if not os.path.exists(path):
        raise MissingArtifactError(f"missing commander checkpoint {path}")
    net = load_checkpoint(path, expect_role="commander")
    net.frozen = True
    if m is not None and net.tags.get("m") not in (None, m):
        raise InvalidConfigError(f"{path} is an m = {net.tags.get('m')} commander, expected m = {m}")
    return net


def commander_path(directory, m, composition):
    return os.path.join(directory, f"commander_m{m}_{composition}.ckpt")


# -- commands -------------------------------------------------------------


def cmd_train_low(args):
    from .training.league import controllers_on_trunk, train_low_level
    cfg = _config(args)
    out = _out_dir(args, cfg)
    rows = []

    def progress(row):
        rows.append(row)
        if not args.quiet and row["update"] % 10 == 0:
            print(f"update {row['update']} stage {row['stage']} steps {row['env_steps']} "
                  f"return {row['return_mean']:.4f}", file=sys.stderr)

    controllers, freeze = None, False
    if args.controllers:
        existing = load_existing_controllers(args.controllers, exclude=args.mode)
        if existing:
            controllers = controllers_on_trunk(existing, seed=cfg.seed)
            freeze = True
    res = train_low_level(args.mode, scenario=cfg.scenario, ppo=cfg.ppo, stages=cfg.league.stages,
                          out_dir=out, seed=cfg.seed, on_update=progress, league_config=cfg.league,
                          controllers=controllers, freeze_trunk=freeze, **cfg.rewards.for_mode(args.mode))
    _write_meta(out, args.mode, args)
    print(json.dumps({"mode": args.mode, "checkpoints": res.checkpoints, "digest": res.net.digest(),
                      "updates": len(res.metrics)}, sort_keys=True))
    return EXIT_OK


def cmd_train_commander(args):
    from dataclasses import replace

    from .engine.types import ScenarioConfig
    from .training.commander import train_commander
    if not 1 <= args.m <= 5:
        raise InvalidConfigError(f"--m must lie in 1..5, got {args.m}")
    cfg = _config(args)
    out = _out_dir(args, cfg)
    controllers = load_controllers(args.controllers)
    cc = replace(cfg.commander, m=args.m, composition=args.composition or cfg.commander.composition).validate()
    scenario = ScenarioConfig(cc.n_agents, cc.n_opponents, map_size=cfg.scenario.map_size,
                              max_ticks=cfg.scenario.max_ticks, dt=cfg.scenario.dt)

    def progress(row):
        if not args.quiet and row["update"] % 10 == 0:
            print(f"update {row['update']} steps {row['env_steps']} return {row['return_mean']:.4f}",
                  file=sys.stderr)

    res = train_commander(cc.m, cc.composition, controllers, scenario=scenario, ppo=cfg.commander_ppo,
                          seed=cfg.seed, opponent_modes=cc.opponent_modes, out_dir=out, on_update=progress)
    _write_meta(out, f"commander_m{cc.m}_{cc.composition}", args)
    print(json.dumps({"m": cc.m, "composition": cc.composition, "checkpoints": res.checkpoints,
                      "digest": res.net.digest()}, sort_keys=True))
    return EXIT_OK


def team_from_spec(spec, controllers_dir, m=3):
    """A team policy from a command-line description.

    ``random``, ``idle`` and ``pursuit`` are scripted; a mode name, ``mixed``
    or ``attack+engage`` runs the controllers; a path ending in ``.ckpt`` is
    a commander over the controllers.
    """
    from .agents import CommanderTeam, ControllerBank, IdleTeam, ModeTeam, PursuitTeam, RandomTeam
    from .engine.options import MODES
    scripted = {"random": RandomTeam, "idle": IdleTeam, "pursuit": PursuitTeam}
    if spec in scripted:
        return scripted[spec]()
    is_commander = spec.endswith(".ckpt")
    parts = MODES if spec == "mixed" else spec.split("+")
    if not is_commander and not all(p in MODES for p in parts):
        raise InvalidConfigError(f"unknown team {spec!r}")
    if controllers_dir is None:
        raise InvalidConfigError(f"team {spec!r} needs --controllers")
    bank = ControllerBank(load_controllers(controllers_dir))
    if is_commander:
        commander = load_commander(spec)
        return CommanderTeam(commander, bank, int(commander.tags.get("m", m)))
    return ModeTeam(bank, tuple(parts))


def cmd_eval(args):
    from .engine.types import HETEROGENEOUS, HOMOGENEOUS, ScenarioConfig
    from .runner import outcome_fractions, run_episodes
    if args.episodes < 1:
        raise InvalidConfigError("--episodes must be at least 1")
    cfg = _config(args)
    seed = cfg.seed if args.seed is None else args.seed
    agents = team_from_spec(args.agents, args.controllers)
    opponents = team_from_spec(args.opponents, args.controllers)
    scenario = ScenarioConfig(args.n_agents, args.n_opponents,
                              HETEROGENEOUS if args.composition == "hetero" else HOMOGENEOUS,
                              map_size=cfg.scenario.map_size, max_ticks=cfg.scenario.max_ticks,
                              dt=cfg.scenario.dt).validate()
    results = run_episodes(scenario, agents, opponents, args.episodes, seed=seed, log=args.log_episodes > 0)
    summary = outcome_fractions(results)
    summary.update(episodes=args.episodes, seed=seed, agents=args.agents, opponents=args.opponents,
                   n_agents=args.n_agents, n_opponents=args.n_opponents, composition=args.composition)
    print(json.dumps(summary, sort_keys=True))
    if args.out or os.environ.get(OUT_ENV):
        out = _out_dir(args, cfg)
        _write_json(os.path.join(out, "eval.json"), summary)
        for r in results[:args.log_episodes]:
            with open(os.path.join(out, f"episode_{r.episode}.jsonl"), "w", encoding="utf-8", newline="\n") as fh:
                fh.write("".join(line + "\n" for line in r.log))
    return EXIT_OK


def _parse_cells(text, kinds):
    """``"attack,-2,3;mixed,0,1"`` to coordinate tuples typed by ``kinds``."""
    if text is None:
        return None
    cells = []
    for chunk in text.split(";"):
        parts = [p.strip() for p in chunk.split(",")]
        if len(parts) != len(kinds):
            raise InvalidConfigError(f"cell {chunk!r} needs {len(kinds)} coordinates")
        try:
            cells.append(tuple(k(p) for k, p in zip(kinds, parts)))
        except ValueError:
            raise InvalidConfigError(f"malformed cell {chunk!r}") from None
    return cells


def cmd_explain(args):
    from .explain import (
        GlobalSweepSpec, LocalSweepSpec, aggregate, run_global_sweep, run_local_sweep, write_grid,
        write_records,
    )
    from .explain.records import GLOBAL_AXES, LOCAL_AXES
    cfg = _config(args)
    sw = cfg.sweep
    out = _out_dir(args, cfg)
    seed = cfg.seed if args.seed is None else args.seed
    if args.sweep == "global":
        spec = GlobalSweepSpec(strategies=sw.strategies, differences=sw.differences, sensing=sw.sensing,
                               episodes_per_cell=args.episodes or sw.episodes_per_cell,
                               composition=sw.composition, seed=seed).validate()
        controllers = load_controllers(args.controllers)
        cells = _parse_cells(args.cells, (str, int, int))
        # a cell subset only needs the commanders of its sensing ranges
        needed = spec.sensing if cells is None else sorted({c[2] for c in cells})
        commanders = {}
        for m in needed:
            path = commander_path(args.commanders, m, spec.composition)
            commanders[m] = load_commander(path, m)
        records = run_global_sweep(spec, commanders, controllers, cells=cells, workers=args.workers)
        names = GLOBAL_AXES
    else:
        spec = LocalSweepSpec(distances=sw.distances, ata_bins=sw.ata_bins, aa_bins=sw.aa_bins,
                              samples_per_cell=args.samples or sw.samples_per_cell, seed=seed).validate()
        commander = load_commander(args.commander, spec.m)
        cells = _parse_cells(args.cells, (float, float, float))
        if cells is not None:
            cells = [tuple(int(v) if float(v).is_integer() else v for v in c) for c in cells]
        records = run_local_sweep(spec, commander, cells=cells)
        names = LOCAL_AXES
    grid = aggregate(records, spec.axes)
    rec_path = write_records(records, names, os.path.join(out, f"{args.sweep}_records.csv"))
    grid_path = write_grid(grid, os.path.join(out, f"{args.sweep}_grid.json"))
    _write_meta(out, f"{args.sweep}_sweep", args)
    print(json.dumps({"records": rec_path, "grid": grid_path, "n_records": len(records),
                      "cells": int(grid.counts[..., 0].size)}, sort_keys=True))
    return EXIT_OK


def cmd_render(args):
    from .explain import read_grid, render_grid
    if not os.path.exists(args.grid):
        raise MissingArtifactError(f"missing grid {args.grid}")
    grid = read_grid(args.grid)
    out = args.out or os.environ.get(OUT_ENV) or os.path.dirname(os.path.abspath(args.grid))
    paths = render_grid(grid, args.slice_axis, out, prefix=os.path.splitext(os.path.basename(args.grid))[0])
    print("\n".join(paths))
    return EXIT_OK


def replay_text(records, title="episode"):
    """Per-tick timeline of option switches, shots, rocket events and kills."""
    lines = [f"# {title}: {len(records)} ticks"]
    for rec in records:
        t = rec["tick"]
        for aid, mode in sorted(rec.get("options", {}).items(), key=lambda kv: int(kv[0])):
            lines.append(f"tick {t}: aircraft {aid} switches to {mode}")
        ev = rec["events"]
        for shooter, target, hit in ev.get("cannon_shots", []):
            lines.append(f"tick {t}: aircraft {shooter} fires cannon at {target} ({'hit' if hit else 'miss'})")
        for shooter, target in ev.get("rocket_launches", []):
            lines.append(f"tick {t}: aircraft {shooter} launches rocket at {target}")
        for shooter, target in ev.get("rocket_hits", []):
            lines.append(f"tick {t}: rocket from {shooter} hits {target}")
        for shooter, victim in ev.get("friendly_fire_hits", []):
            lines.append(f"tick {t}: friendly fire, {shooter} hits {victim}")
        for victim, killer in ev.get("kills", []):
            lines.append(f"tick {t}: aircraft {victim} destroyed by {killer}")
    return "\n".join(lines) + "\n"


def cmd_replay(args):
    from .engine.episode_log import read_log
    if not os.path.exists(args.log):
        raise MissingArtifactError(f"missing log {args.log}")
    try:
        records = read_log(args.log)
    except (KeyError, TypeError, UnicodeDecodeError) as exc:
        raise InvalidInputError(f"{args.log}: malformed log ({exc!r})") from None
    sys.stdout.write(replay_text(records, os.path.basename(args.log)))
    return EXIT_OK


# -- parser ---------------------------------------------------------------


def build_parser():
    p = _Parser(prog="aircombat", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(q, config=True):
        if config:
            q.add_argument("--config", help="run config JSON (defaults apply when omitted)")
        q.add_argument("--out", help=f"output directory (else ${OUT_ENV}, else the config's output_dir)")
        q.add_argument("--workers", type=int, default=1, help="parallel worker processes")
        q.add_argument("--quiet", action="store_true")

    q = sub.add_parser("train-low", help="train one low-level controller through the league")
    q.add_argument("--mode", required=True, choices=("attack", "engage", "defend"))
    q.add_argument("--controllers", help="directory of trained controllers whose shared trunk is reused frozen")
    common(q)
    q.set_defaults(fn=cmd_train_low)

    q = sub.add_parser("train-commander", help="train a commander over frozen controllers")
    q.add_argument("--m", type=int, required=True, help="sensing capability 1..5")
    q.add_argument("--composition", choices=("homo", "hetero"))
    q.add_argument("--controllers", required=True, help="directory with attack/engage/defend .ckpt")
    common(q)
    q.set_defaults(fn=cmd_train_commander)

    q = sub.add_parser("eval", help="play two teams against each other")
    q.add_argument("--agents", required=True)
    q.add_argument("--opponents", required=True)
    q.add_argument("--controllers")
    q.add_argument("--episodes", type=int, default=100)
    q.add_argument("--n-agents", type=int, default=3)
    q.add_argument("--n-opponents", type=int, default=3)
    q.add_argument("--composition", choices=("homo", "hetero"), default="homo")
    q.add_argument("--seed", type=int)
    q.add_argument("--log-episodes", type=int, default=0, help="write JSON-lines logs of the first K episodes")
    common(q)
    q.set_defaults(fn=cmd_eval)

    q = sub.add_parser("explain", help="activation sweeps")
    q.add_argument("sweep", choices=("global", "local"))
    q.add_argument("--commanders", help="directory with commander_m<m>_<composition>.ckpt (global)")
    q.add_argument("--commander", help="m = 3 commander checkpoint (local)")
    q.add_argument("--controllers", help="controller directory (global)")
    q.add_argument("--cells", help="restrict to cells, e.g. 'attack,-2,3;mixed,0,1' or '1,0,30'")
    q.add_argument("--episodes", type=int, help="episodes per cell (global)")
    q.add_argument("--samples", type=int, help="samples per cell (local)")
    q.add_argument("--seed", type=int)
    common(q)
    q.set_defaults(fn=cmd_explain)

    q = sub.add_parser("render", help="SVG heatmaps from a grid")
    q.add_argument("--grid", required=True)
    q.add_argument("--slice-axis", required=True)
    q.add_argument("--out")
    q.set_defaults(fn=cmd_render)

    q = sub.add_parser("replay", help="timeline of an episode log")
    q.add_argument("--log", required=True)
    q.set_defaults(fn=cmd_replay)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        if args.command == "explain":
            need = ("commanders", "controllers") if args.sweep == "global" else ("commander",)
            for name in need:
                if getattr(args, name) is None:
                    raise UsageError(f"explain {args.sweep} needs --{name}")
        return args.fn(args)
    except AircombatError as exc:
        print(f"aircombat: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"aircombat: error: {exc}", file=sys.stderr)
        return EXIT_MISSING


if __name__ == "__main__":
    sys.exit(main())
