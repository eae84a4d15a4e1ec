"""Run configuration parsing and deterministic CSV / manifest emission."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, fields, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from . import __version__
from .env import ACTION_LABELS, REWARD_LABELS, ROOM_LABELS, TOOL_LABELS, Action, CORNERS, RewardObs, Room, Tool, parse_location
from .experiments import DEFAULT_GAMMA, EXP2_TRIALS, EXP3_TRIALS, ExperimentReport, experiment_defaults
from .model import MODEL_VARIANTS, TOOL_STATE


class ConfigError(ValueError):
    """Raised with every problem found in a config text, one per entry of ``errors``."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    pass


@dataclass(frozen=True)
class RunConfig:
    experiment: int
    model_variant: str = TOOL_STATE
    final_corner: str = "Northeast"
    utility_only: bool = False
    num_trials: Optional[int] = None
    base_seed: int = 0
    gamma: float = DEFAULT_GAMMA
    # None means the per-experiment default, filled in by parse_config
    alpha_init: Optional[float] = None
    eta: Optional[float] = None
    action_selection: Optional[str] = None
    output_dir: str = "out"

    @property
    def trials(self) -> int:
        if self.num_trials is not None:
            return self.num_trials
        return {1: 1, 2: EXP2_TRIALS, 3: EXP3_TRIALS}[self.experiment]

    @property
    def selection(self) -> str:
        if self.action_selection is not None:
            return self.action_selection
        return "argmax" if self.experiment == 1 else "sample"


_BOOL = {"true": True, "yes": True, "1": True, "on": True, "false": False, "no": False, "0": False, "off": False}
_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    if "bool" in kind:
        if raw.lower() not in _BOOL:
            raise ValueError(f"expected a boolean, got {raw!r}")
        return _BOOL[raw.lower()]
    if "int" in kind:
        if "Optional" in kind and raw.lower() in ("", "none", "default"):
            return None
        return int(raw)
    if "float" in kind:
        if "Optional" in kind and raw.lower() in ("", "none", "default"):
            return None
        return float(raw)
    if "Optional" in kind and raw.lower() in ("", "none", "default"):
        return None
    return raw


def validate_config(cfg: RunConfig) -> list[str]:
    errors = []
    if cfg.experiment not in (1, 2, 3):
        errors.append(f"experiment: must be 1, 2 or 3, got {cfg.experiment}")
    if cfg.model_variant not in MODEL_VARIANTS:
        errors.append(f"model_variant: must be one of {', '.join(MODEL_VARIANTS)}, got {cfg.model_variant!r}")
    try:
        corner = parse_location(cfg.final_corner)
        if corner not in CORNERS:
            errors.append(f"final_corner: must be Northeast or Northwest, got {cfg.final_corner!r}")
    except ValueError:
        errors.append(f"final_corner: unknown location {cfg.final_corner!r}")
    if cfg.num_trials is not None and cfg.num_trials < 1:
        errors.append("num_trials: must be >= 1")
    if not math.isfinite(cfg.gamma) or not cfg.gamma > 0:
        errors.append(f"gamma: must be > 0, got {cfg.gamma}")
    if cfg.alpha_init is not None and not cfg.alpha_init > 0:
        errors.append(f"alpha_init: must be > 0, got {cfg.alpha_init}")
    if cfg.eta is not None and not cfg.eta >= 0:
        errors.append(f"eta: must be >= 0, got {cfg.eta}")
    if cfg.action_selection not in (None, "sample", "argmax"):
        errors.append(f"action_selection: must be sample or argmax, got {cfg.action_selection!r}")
    if cfg.base_seed < 0:
        errors.append("base_seed: must be >= 0")
    return errors


def parse_config(text: str) -> RunConfig:
    """Parse flat ``key = value`` text (``#`` starts a comment) into a validated :class:`RunConfig`."""
    values, errors, seen = {}, [], {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            errors.append(f"line {lineno}: expected 'key = value', got {body!r}")
            continue
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in _FIELD_TYPES:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in seen:
            errors.append(f"line {lineno}: duplicate key {key!r} (first set on line {seen[key]})")
            continue
        seen[key] = lineno
        try:
            values[key] = _coerce(key, raw)
        except ValueError as exc:
            errors.append(f"line {lineno}: {key}: {exc}")
    if "experiment" not in values and not any("experiment" in e for e in errors):
        errors.append("missing required key 'experiment'")
    if errors:
        raise ParseError(errors)
    cfg = RunConfig(**values)
    problems = validate_config(cfg)
    if problems:
        raise ValidationError([f"line {seen.get(p.split(':')[0], '?')}: {p}" for p in problems])
    return fill_defaults(cfg)


def fill_defaults(cfg: RunConfig) -> RunConfig:
    """Replace unset ``alpha_init`` / ``eta`` with the defaults of the chosen experiment."""
    d = experiment_defaults(cfg.experiment)
    return replace(cfg,
                   alpha_init=d["alpha_init"] if cfg.alpha_init is None else cfg.alpha_init,
                   eta=d["eta"] if cfg.eta is None else cfg.eta)


def render_config(cfg: RunConfig) -> str:
    lines = []
    for f in fields(RunConfig):
        value = getattr(cfg, f.name)
        if value is None:
            value = "none"
        elif isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


# -- outputs ---------------------------------------------------------------------

def fmt(x) -> str:
    """Nine significant digits for floats, plain text otherwise."""
    if isinstance(x, float):
        return f"{x:.9g}"
    return str(x)


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8", newline="")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


STEPS_HEADER = ("trial", "run", "steps_to_solve")
RANKS_HEADER = ("trial", "run", "step", "utility_rank", "infogain_rank")
PROBES_HEADER = ("trial", "cumulative_step", "probe_name", "probability")
EFE_HEADER = ("policy_index", "utility", "state_ig", "param_ig", "G")
ACTIONS_HEADER = ("trial", "run", "step", "action", "observed_room", "observed_tool", "observed_reward")


def _report_rows(report: ExperimentReport):
    steps, ranks, probes, actions = [], [], [], []
    for tr in report.trials:
        for run, s in enumerate(tr.steps_to_solve):
            steps.append((tr.trial, run, s))
        for run, (us, igs) in enumerate(zip(tr.utility_rank, tr.infogain_rank)):
            for k, (u, i) in enumerate(zip(us, igs)):
                ranks.append((tr.trial, run, k, u, i))
        for name in sorted(tr.probes):
            for k, p in enumerate(tr.probes[name]):
                probes.append((tr.trial, k, name, float(p)))
        for run, k, a, room, tool, reward in tr.actions:
            actions.append((tr.trial, run, k, ACTION_LABELS[Action(a)], ROOM_LABELS[Room(room)],
                            TOOL_LABELS[Tool(tool)], REWARD_LABELS[RewardObs(reward)]))
    probes.sort(key=lambda r: (r[0], r[1], r[2]))
    return steps, ranks, probes, actions


def emit_outputs(report: ExperimentReport, out_dir, run_config: Optional[RunConfig] = None,
                 prefix: str = "", timestamp: Optional[str] = None) -> dict[str, Path]:
    """Write the CSV set for ``report`` (and its baseline, prefixed ``baseline_``) plus ``manifest.json``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create output directory {out}: {exc}") from exc
    written: dict[str, Path] = {}
    steps, ranks, probes, actions = _report_rows(report)
    try:
        for name, header, rows in (
            ("steps.csv", STEPS_HEADER, steps),
            ("ranks.csv", RANKS_HEADER, ranks),
            ("probes.csv", PROBES_HEADER, probes),
            ("actions.csv", ACTIONS_HEADER, actions),
        ):
            path = out / f"{prefix}{name}"
            _write_csv(path, header, rows)
            written[path.name] = path
        if len(report.trials) == 1 or report.name == "experiment1":
            # first decision of every episode, one block of rows per trial in trial order
            efe_rows = []
            for tr in report.trials:
                if not tr.efe:
                    continue
                ev = tr.efe[0]
                for i in range(len(ev)):
                    efe_rows.append((i, float(ev.total_utility[i]), float(ev.state_ig[i].sum()),
                                     float(ev.param_ig[i].sum()), float(ev.G[i])))
            if efe_rows:
                path = out / f"{prefix}efe.csv"
                _write_csv(path, EFE_HEADER, efe_rows)
                written[path.name] = path
        if report.baseline is not None:
            written.update(emit_outputs(report.baseline, out, prefix="baseline_"))
    except OSError as exc:
        raise IoError(f"failed writing outputs to {out}: {exc}") from exc

    if prefix:
        return written
    manifest = {
        "artifact_version": __version__,
        "timestamp": timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "experiment": report.name,
        "config": asdict(run_config) if run_config is not None else None,
        "agent": asdict(report.config),
        "alpha_init": None if math.isnan(report.alpha_init) else report.alpha_init,
        "defaults": {str(k): experiment_defaults(k) for k in (1, 2, 3)},
        "files": {name: _sha256(path) for name, path in sorted(written.items())},
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
    written["manifest.json"] = path
    return written


def verify_manifest(out_dir) -> list[str]:
    """Names of files whose checksum no longer matches the manifest."""
    out = Path(out_dir)
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    return [name for name, digest in manifest["files"].items() if _sha256(out / name) != digest]


class IoError(OSError):
    pass
