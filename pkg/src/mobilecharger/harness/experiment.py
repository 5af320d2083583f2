"""Monte-Carlo docking experiment: search, then tactile check, then gate.

Each trial gets its own seed derived from ``(master_seed, omega index,
trial index)``, so trials are independent of each other and of execution
order. Records are kept sorted by ``trial_id``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .. import classifier as C
from .. import search as S
from .. import tactile as T
from ..geometry import Vec3
from ..world import initial_world
from .config import Config

RECORDS_FORMAT = "mobilecharger.trials"
RECORDS_VERSION = 1

KINDS = (T.Kind.ANGULAR, T.Kind.VERTICAL, T.Kind.HORIZONTAL)

# Stable column order; new columns may only ever be appended.
CSV_COLUMNS = (
    "trial_id", "omega_deg", "L_cm", "seed", "success", "reason", "steps", "sim_time_s",
    "target_x_cm", "target_y_cm", "target_z_cm",
    "phi_true_deg", "dx_true_mm", "dy_true_mm",
    "angular_pred_deg", "vertical_pred_mm", "horizontal_pred_mm", "gate",
)


@dataclass(frozen=True)
class TrialRecord:
    trial_id: int
    omega: float
    L: float
    seed: int
    outcome: S.SearchOutcome
    misalignment_true: tuple[float, float, float] | None = None
    # (angular, vertical, horizontal) labels
    misalignment_predicted: tuple[T.MisalignmentLabel, ...] | None = None
    gate: C.GateDecision | None = None

    def __post_init__(self):
        if self.gate is not None and not self.outcome.success:
            raise ValueError("a gate decision requires a successful search")

    @property
    def success(self) -> bool:
        return self.outcome.success

    @property
    def steps(self) -> int:
        return self.outcome.steps

    @property
    def sim_time(self) -> float:
        return self.outcome.sim_time

    def to_json(self) -> dict:
        o = self.outcome
        t = o.final_target_delta_frame
        return {
            "trial_id": self.trial_id,
            "omega": self.omega,
            "L": self.L,
            "seed": self.seed,
            "outcome": {
                "success": o.success,
                "reason": o.reason.value,
                "steps": o.steps,
                "sim_time": o.sim_time,
                "final_target_delta_frame": None if t is None else [t.x, t.y, t.z],
            },
            "misalignment_true": None if self.misalignment_true is None
            else list(self.misalignment_true),
            "misalignment_predicted": None if self.misalignment_predicted is None
            else {lab.kind.value: lab.value for lab in self.misalignment_predicted},
            "gate": None if self.gate is None else self.gate.value,
        }

    @classmethod
    def from_json(cls, d: dict) -> TrialRecord:
        o = d["outcome"]
        t = o.get("final_target_delta_frame")
        outcome = S.SearchOutcome(bool(o["success"]), S.Reason(o["reason"]), int(o["steps"]),
                                  float(o["sim_time"]), None if t is None else Vec3(*t))
        mt = d.get("misalignment_true")
        mp = d.get("misalignment_predicted")
        gate = d.get("gate")
        return cls(
            int(d["trial_id"]), float(d["omega"]), float(d["L"]), int(d["seed"]), outcome,
            None if mt is None else tuple(float(v) for v in mt),
            None if mp is None else tuple(_label(k, mp[k.value]) for k in KINDS),
            None if gate is None else C.GateDecision(gate),
        )


def _label(kind: T.Kind, value: float) -> T.MisalignmentLabel:
    return T.MisalignmentLabel(kind, kind.class_values.index(float(value)))


def trial_seed(master_seed: int, omega_index: int, trial_index: int) -> int:
    ss = np.random.SeedSequence([master_seed, omega_index, trial_index])
    return int(ss.generate_state(1, np.uint64)[0])


# Training is deterministic, so models for a given tactile/train config are
# reused across runs in the same process.
_MODEL_CACHE: dict = {}


def trained_models(cfg: Config) -> dict:
    """One classifier per kind, loaded from the configured paths or trained."""
    out = {}
    for kind in KINDS:
        path = cfg.experiment.models.get(kind.value)
        if path:
            out[kind] = C.CnnModel.load(path)
            continue
        key = (kind, cfg.tactile, cfg.train)
        if key not in _MODEL_CACHE:
            ds = T.generate_dataset(kind, cfg.tactile.n_per_class, cfg.tactile.noise_sigma,
                                    cfg.tactile.dataset_seed)
            _MODEL_CACHE[key] = C.train(ds, cfg.train)
        out[kind] = _MODEL_CACHE[key]
    return out


def run_trial(cfg: Config, omega_index: int, trial_index: int,
              models: dict | None = None) -> TrialRecord:
    ex = cfg.experiment
    omega = ex.omegas[omega_index]
    seed = trial_seed(ex.master_seed, omega_index, trial_index)
    w = initial_world(omega, cfg.world.distance_cm, cfg.world.stand_height_cm, seed,
                      cfg.world.delta_height_cm)
    outcome = S.run_search(w, cfg.detector, seed, cfg.delta_geometry, timing=cfg.search_timing)
    rec = dict(trial_id=omega_index * ex.trials_per_omega + trial_index, omega=omega,
               L=cfg.world.distance_cm, seed=seed, outcome=outcome)
    if not outcome.success:
        return TrialRecord(**rec)

    # separate stream so tactile draws never perturb the search
    rng = np.random.default_rng([seed, 1])
    phi = float(rng.choice(cfg.tactile.phi_choices))
    dx = float(rng.choice(cfg.tactile.offset_choices))
    dy = float(rng.choice(cfg.tactile.offset_choices))
    rec["misalignment_true"] = (phi, dx, dy)
    if not ex.classify or models is None:
        return TrialRecord(**rec)
    frame = T.synthesize(T.Kind.ANGULAR, phi, dx, dy, cfg.tactile.noise_sigma, rng)
    labels = tuple(C.classify(models[k], frame) for k in KINDS)
    rec["misalignment_predicted"] = labels
    rec["gate"] = C.safety_gate(labels[0], ex.critical_angle_deg)
    return TrialRecord(**rec)


def run_experiment(cfg: Config, models: dict | None = None) -> list[TrialRecord]:
    ex = cfg.experiment
    if ex.classify and models is None:
        models = trained_models(cfg)
    records = [run_trial(cfg, wi, ti, models)
               for wi in range(len(ex.omegas)) for ti in range(ex.trials_per_omega)]
    return sorted(records, key=lambda r: r.trial_id)


def success_rate(records, group_by_omega: bool = False):
    """Overall success fraction, or ``{omega: fraction}`` when grouped."""
    records = list(records)
    if not records:
        raise ValueError("success_rate needs at least one record")
    if not group_by_omega:
        return sum(r.success for r in records) / len(records)
    groups: dict[float, list[bool]] = {}
    for r in records:
        groups.setdefault(r.omega, []).append(r.success)
    return {w: sum(v) / len(v) for w, v in sorted(groups.items())}


def success_groups(records) -> list[list[float]]:
    """Per-omega 0/1 success indicators, omegas ascending."""
    groups: dict[float, list[float]] = {}
    for r in records:
        groups.setdefault(r.omega, []).append(1.0 if r.success else 0.0)
    return [groups[w] for w in sorted(groups)]


# -- persistence ---------------------------------------------------------

def dumps_json(records) -> str:
    doc = {
        "format": RECORDS_FORMAT,
        "version": RECORDS_VERSION,
        "records": [r.to_json() for r in sorted(records, key=lambda r: r.trial_id)],
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def loads_json(text: str) -> list[TrialRecord]:
    doc = json.loads(text)
    if doc.get("format") != RECORDS_FORMAT:
        raise ValueError("not a trial-record document")
    if doc.get("version") != RECORDS_VERSION:
        raise ValueError(f"unsupported record version {doc.get('version')}")
    return [TrialRecord.from_json(d) for d in doc["records"]]


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _row(r: TrialRecord) -> list[str]:
    t = r.outcome.final_target_delta_frame
    mt = r.misalignment_true or (None, None, None)
    mp = r.misalignment_predicted
    pred = (None, None, None) if mp is None else tuple(lab.value for lab in mp)
    vals = [r.trial_id, r.omega, r.L, r.seed, r.success, r.outcome.reason.value, r.steps,
            r.sim_time, *((t.x, t.y, t.z) if t is not None else (None,) * 3), *mt, *pred,
            None if r.gate is None else r.gate.value]
    return [_cell(v) for v in vals]


def write_csv(records, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in sorted(records, key=lambda r: r.trial_id):
        w.writerow(_row(r))


def read_csv(fh) -> list[TrialRecord]:
    rd = csv.reader(fh)
    header = next(rd, None)
    if header is None or tuple(header[:len(CSV_COLUMNS)]) != CSV_COLUMNS:
        raise ValueError("unexpected trial CSV header")

    def opt(s, f=float):
        return None if s == "" else f(s)

    out = []
    for row in rd:
        c = dict(zip(CSV_COLUMNS, row))
        tx, ty, tz = (opt(c[k]) for k in ("target_x_cm", "target_y_cm", "target_z_cm"))
        outcome = S.SearchOutcome(c["success"] == "true", S.Reason(c["reason"]),
                                  int(c["steps"]), float(c["sim_time_s"]),
                                  None if tx is None else Vec3(tx, ty, tz))
        mt = tuple(opt(c[k]) for k in ("phi_true_deg", "dx_true_mm", "dy_true_mm"))
        preds = [opt(c[k]) for k in ("angular_pred_deg", "vertical_pred_mm",
                                     "horizontal_pred_mm")]
        out.append(TrialRecord(
            int(c["trial_id"]), float(c["omega_deg"]), float(c["L_cm"]), int(c["seed"]),
            outcome,
            None if mt[0] is None else mt,
            None if preds[0] is None else tuple(_label(k, v) for k, v in zip(KINDS, preds)),
            None if c["gate"] == "" else C.GateDecision(c["gate"]),
        ))
    return out


def export(records, fmt: str, path) -> None:
    if fmt == "json":
        with open(path, "w") as fh:
            fh.write(dumps_json(records))
    elif fmt == "csv":
        with open(path, "w", newline="") as fh:
            write_csv(records, fh)
    else:
        raise ValueError(f"unknown format {fmt!r}")


def import_records(path, fmt: str | None = None) -> list[TrialRecord]:
    fmt = fmt or ("csv" if str(path).endswith(".csv") else "json")
    if fmt == "json":
        with open(path) as fh:
            return loads_json(fh.read())
    if fmt == "csv":
        with open(path, newline="") as fh:
            return read_csv(fh)
    raise ValueError(f"unknown format {fmt!r}")


def summarize(records) -> dict:
    """Success rates plus ANOVAs over omega for success and simulated time."""
    from .stats import one_way_anova
    from ..errors import DegenerateInput

    records = list(records)
    out = {
        "n_trials": len(records),
        "success_rate": success_rate(records),
        "success_rate_by_omega": {repr(k): v for k, v in success_rate(records, True).items()},
    }
    gate_counts = {}
    for r in records:
        if r.gate is not None:
            gate_counts[r.gate.value] = gate_counts.get(r.gate.value, 0) + 1
    out["gate_counts"] = gate_counts

    def anova(groups):
        try:
            a = one_way_anova(groups)
        except (ValueError, DegenerateInput) as exc:
            return {"error": str(exc)}
        f = a.f_statistic
        return {"F": f if math.isfinite(f) else None, "df_between": a.df_between,
                "df_within": a.df_within, "p": a.p_value}

    out["anova_success"] = anova(success_groups(records))
    times: dict[float, list[float]] = {}
    for r in records:
        if r.success:
            times.setdefault(r.omega, []).append(r.sim_time)
    out["anova_sim_time"] = anova([times[w] for w in sorted(times)])
    return out
