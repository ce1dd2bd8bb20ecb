"""Command-line driver: strict JSON config in, CSV/JSON results out.

Config documents use dB/dBm; most quantities also accept a linear twin
(``max_power_mw`` for ``max_power_dbm``, ``target_sinr`` for
``target_sinr_db``...). The scenario echo written next to the results uses
the linear forms so that re-reading it gives back the identical scenario.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import pydantic
from pydantic import BaseModel, ConfigDict, model_validator

from .errors import FemtoError, ValidationError
from .model import GainMatrix, Node, NodeKind, SystemParams, db_to_linear, linear_to_db
from .scenario import (
    DEFAULT_COMPARISON,
    Scenario,
    Scheme,
    SchemeSummary,
    compare_schemes,
    generate_random_scenario,
    run_scenario,
)

log = logging.getLogger("femtocoord")

CSV_HEADER = ["round", "fms_id", "resource", "power_mw", "sinr_db", "throughput_bps_hz"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", strict=False)


def _one_of(values, db_key, lin_key, required=True):
    given = [k for k in (db_key, lin_key) if values.get(k) is not None]
    if len(given) > 1:
        raise ValueError(f"give either {db_key} or {lin_key}, not both")
    if required and not given:
        raise ValueError(f"{db_key} (or {lin_key}) is required")
    return values


class ParamsDoc(_Strict):
    max_power_dbm: Optional[float] = None
    max_power_mw: Optional[float] = None
    nominal_rrm_power_dbm: Optional[float] = None
    nominal_rrm_power_mw: Optional[float] = None
    detection_threshold_dbm: Optional[float] = None
    detection_threshold_mw: Optional[float] = None
    grid_points: int = 4097
    pathloss_ref_loss_db: float = 37.0
    pathloss_exponent: float = 3.0
    ref_distance_m: float = 1.0

    @model_validator(mode="before")
    @classmethod
    def _units(cls, values):
        if isinstance(values, dict):
            _one_of(values, "max_power_dbm", "max_power_mw")
            _one_of(values, "nominal_rrm_power_dbm", "nominal_rrm_power_mw")
            _one_of(values, "detection_threshold_dbm", "detection_threshold_mw", required=False)
        return values


class NodeDoc(_Strict):
    id: int
    kind: Literal["fbs", "fms"]
    position: Tuple[float, float]
    serving_fbs: Optional[int] = None
    priority: float = 1.0
    target_sinr_db: Optional[float] = None
    target_sinr: Optional[float] = None
    noise_variance_dbm: Optional[float] = None
    noise_variance_mw: Optional[float] = None

    @model_validator(mode="after")
    def _fms_fields(self):
        if self.kind == "fms":
            if self.serving_fbs is None:
                raise ValueError("an fms needs serving_fbs")
            _one_of(vars(self), "target_sinr_db", "target_sinr")
            _one_of(vars(self), "noise_variance_dbm", "noise_variance_mw")
        return self


class GeneratorDoc(_Strict):
    n_cells: int
    area: float
    seed: Optional[int] = None
    fms_radius: float = 6.0
    priorities: List[float] = [1.0, 2.0, 3.0, 4.0]
    target_sinr_db_range: Tuple[float, float] = (0.0, 20.0)
    noise_variance_dbm: float = -90.0


class RetransmitDoc(_Strict):
    round: int
    fms: int


SchemeName = Literal["none", "orthogonal", "priority", "throughput-approx", "throughput-exact"]


class ConfigDoc(_Strict):
    params: ParamsDoc
    nodes: Optional[List[NodeDoc]] = None
    generator: Optional[GeneratorDoc] = None
    gain_override: Optional[Dict[str, float]] = None
    gain_override_linear: Optional[Dict[str, float]] = None
    scheme: SchemeName = "throughput-approx"
    rounds: int = 1
    resource_count: int = 1
    seed: Optional[int] = None
    retransmit: List[RetransmitDoc] = []

    @model_validator(mode="after")
    def _source(self):
        if (self.nodes is None) == (self.generator is None):
            raise ValueError("give exactly one of nodes or generator")
        if self.gain_override is not None and self.gain_override_linear is not None:
            raise ValueError("give either gain_override or gain_override_linear, not both")
        return self


def _loc_to_path(loc) -> str:
    path = ""
    for part in loc:
        if isinstance(part, int):
            path += f"[{part}]"
        elif str(part).startswith("function-") or part in ("tuple", "list"):
            continue
        else:
            path += f".{part}" if path else str(part)
    return path


def _pair_key(key: str, path: str) -> Tuple[int, int]:
    try:
        a, b = (int(s) for s in key.split(","))
    except ValueError:
        raise ValidationError(path, f"key {key!r} must look like 'a,b'") from None
    return a, b


def _params(doc: ParamsDoc, grid_points: Optional[int] = None) -> SystemParams:
    def pick(db, lin, default=None):
        if lin is not None:
            return lin
        if db is not None:
            return db_to_linear(db)
        return default

    return SystemParams(
        max_power=pick(doc.max_power_dbm, doc.max_power_mw),
        nominal_rrm_power=pick(doc.nominal_rrm_power_dbm, doc.nominal_rrm_power_mw),
        detection_threshold=pick(doc.detection_threshold_dbm, doc.detection_threshold_mw, 0.0),
        grid_points=grid_points if grid_points is not None else doc.grid_points,
        pathloss_ref_loss=doc.pathloss_ref_loss_db,
        pathloss_exponent=doc.pathloss_exponent,
        ref_distance=doc.ref_distance_m,
    )


def parse_config(document, seed: Optional[int] = None) -> Scenario:
    """Turn a config document (dict or JSON text) into a validated Scenario.

    ``seed`` stands in for the run seed (and a missing generator seed) when
    given, which is how ``--seed`` reaches generator-mode configs.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ValidationError("", f"not valid JSON: {exc}") from exc
    try:
        doc = ConfigDoc.model_validate(document)
    except pydantic.ValidationError as exc:
        err = exc.errors()[0]
        raise ValidationError(_loc_to_path(err["loc"]), err["msg"]) from None

    params = _params(doc.params)
    run_seed = seed if seed is not None else doc.seed

    if doc.generator is not None:
        gen = doc.generator
        gen_seed = gen.seed if gen.seed is not None else seed
        if gen_seed is None:
            raise ValidationError("generator.seed", "a seed is required in generator mode")
        nodes = generate_random_scenario(
            gen.n_cells, gen.area, gen_seed,
            params=params,
            fms_radius=gen.fms_radius,
            priorities=tuple(gen.priorities),
            target_sinr_db=tuple(gen.target_sinr_db_range),
            noise_variance_dbm=gen.noise_variance_dbm,
        ).nodes
        if run_seed is None:
            run_seed = gen_seed
    else:
        nodes = tuple(_node(n) for n in doc.nodes)

    override = None
    entries = doc.gain_override if doc.gain_override is not None else doc.gain_override_linear
    if entries is not None:
        field = "gain_override" if doc.gain_override is not None else "gain_override_linear"
        to_linear = db_to_linear if doc.gain_override is not None else float
        directed = {_pair_key(k, field): to_linear(v) for k, v in entries.items()}
        try:
            override = GainMatrix.from_directed(directed)
        except FemtoError as exc:
            raise ValidationError(field, str(exc)) from exc

    return Scenario(
        params=params,
        nodes=nodes,
        gain_override=override,
        resource_count=doc.resource_count,
        rounds=doc.rounds,
        scheme=Scheme(doc.scheme),
        seed=run_seed if run_seed is not None else 0,
        retransmissions=frozenset((r.round, r.fms) for r in doc.retransmit),
    )


def _node(doc: NodeDoc) -> Node:
    if doc.kind == "fbs":
        return Node(doc.id, NodeKind.FBS, tuple(doc.position), priority=doc.priority)
    target = doc.target_sinr if doc.target_sinr is not None else db_to_linear(doc.target_sinr_db)
    noise = (doc.noise_variance_mw if doc.noise_variance_mw is not None
             else db_to_linear(doc.noise_variance_dbm))
    return Node(doc.id, NodeKind.FMS, tuple(doc.position), serving_fbs=doc.serving_fbs,
                priority=doc.priority, target_sinr=target, noise_variance=noise)


def scenario_to_document(scenario: Scenario) -> dict:
    """Config document (linear units) that parses back to ``scenario``."""
    p = scenario.params
    nodes = []
    for n in scenario.nodes:
        entry = {"id": n.id, "kind": n.kind.value, "position": list(n.position),
                 "priority": n.priority}
        if n.is_fms:
            entry.update(serving_fbs=n.serving_fbs, target_sinr=n.target_sinr,
                         noise_variance_mw=n.noise_variance)
        nodes.append(entry)
    doc = {
        "params": {
            "max_power_mw": p.max_power,
            "nominal_rrm_power_mw": p.nominal_rrm_power,
            "detection_threshold_mw": p.detection_threshold,
            "grid_points": p.grid_points,
            "pathloss_ref_loss_db": p.pathloss_ref_loss,
            "pathloss_exponent": p.pathloss_exponent,
            "ref_distance_m": p.ref_distance,
        },
        "nodes": nodes,
        "scheme": scenario.scheme.value,
        "rounds": scenario.rounds,
        "resource_count": scenario.resource_count,
        "seed": scenario.seed,
        "retransmit": [{"round": r, "fms": f} for r, f in sorted(scenario.retransmissions)],
    }
    if scenario.gain_override is not None:
        doc["gain_override_linear"] = {f"{a},{b}": g for (a, b), g in scenario.gain_override.items()}
    return doc


# -- output ----------------------------------------------------------------

def _fixed(x: float) -> str:
    if math.isinf(x):
        return "-inf" if x < 0 else "inf"
    return f"{x:.6f}"


def _sig(x: float) -> str:
    return f"{x:.6g}"


def rounds_csv(metrics) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    rows = sorted(((rm.round_index, m) for rm in metrics for m in rm.per_fms),
                  key=lambda t: (t[0], t[1].fms))
    for r, m in rows:
        writer.writerow([r, m.fms, m.resource, _sig(m.power), _fixed(linear_to_db(m.sinr)),
                         _fixed(m.throughput)])
    return buf.getvalue()


def summary_document(metrics, scheme: Scheme, seed: int) -> dict:
    totals = [rm.system_weighted_throughput for rm in metrics]
    warnings = [f"round {rm.round_index}: {w}" for rm in metrics for w in rm.warnings]
    return {
        "scheme": Scheme(scheme).value,
        "seed": seed,
        "rounds": len(metrics),
        "system_weighted_throughput": {
            "mean": math.fsum(totals) / len(totals),
            "min": min(totals),
            "max": max(totals),
        },
        "warnings": warnings,
    }


def comparison_csv(rows: Sequence[SchemeSummary]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["scheme", "mean_weighted_throughput", "sinr_min_db", "sinr_median_db",
                     "sinr_max_db", "silenced_fbs"])
    for row in rows:
        writer.writerow([row.scheme.value, _fixed(row.mean_weighted_throughput),
                         _fixed(linear_to_db(row.sinr_min)), _fixed(linear_to_db(row.sinr_median)),
                         _fixed(linear_to_db(row.sinr_max)), row.silenced_fbs])
    return buf.getvalue()


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


@dataclass(frozen=True)
class RunConfig:
    config_path: Path
    out_dir: Path = Path("results")
    scheme: Optional[Scheme] = None
    rounds: Optional[int] = None
    seed: Optional[int] = None
    grid_points: Optional[int] = None
    emit_csv: bool = True
    emit_summary: bool = True
    compare: bool = False


def build_scenario(run: RunConfig) -> Scenario:
    try:
        text = Path(run.config_path).read_text()
    except OSError as exc:
        raise ValidationError("--config", str(exc)) from exc
    scenario = parse_config(text, seed=run.seed)
    changes = {}
    if run.scheme is not None:
        changes["scheme"] = run.scheme
    if run.rounds is not None:
        changes["rounds"] = run.rounds
    if run.grid_points is not None:
        changes["params"] = dataclasses.replace(scenario.params, grid_points=run.grid_points)
    return dataclasses.replace(scenario, **changes) if changes else scenario


def emit_results(metrics, scenario: Scenario, run: RunConfig,
                 comparison: Optional[Sequence[SchemeSummary]] = None) -> List[Path]:
    """Write the per-round CSV, summary JSON, scenario echo and comparison."""
    out = Path(run.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {"scenario.json": _dump_json(scenario_to_document(scenario))}
    if run.emit_csv:
        files["rounds.csv"] = rounds_csv(metrics)
    if run.emit_summary:
        files["summary.json"] = _dump_json(summary_document(metrics, scenario.scheme, scenario.seed))
    if comparison is not None:
        files["comparison.csv"] = comparison_csv(comparison)
    written = []
    for name, text in files.items():
        path = out / name
        path.write_text(text)
        written.append(path)
    return written


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="femtocoord",
        description="Simulate over-the-air power coordination in a femtocell network.",
    )
    parser.add_argument("--config", required=True, type=Path, help="scenario JSON document")
    parser.add_argument("--scheme", choices=[s.value for s in Scheme])
    parser.add_argument("--rounds", type=int)
    parser.add_argument("--seed", type=int, help="unsigned 64-bit run seed")
    parser.add_argument("--grid-points", type=int)
    parser.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    parser.add_argument("--compare", action="store_true",
                        help="also run none/orthogonal/priority/throughput-approx side by side")
    parser.add_argument("--no-csv", action="store_true")
    parser.add_argument("--no-summary", action="store_true")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    run = RunConfig(
        config_path=args.config,
        out_dir=args.out,
        scheme=Scheme(args.scheme) if args.scheme else None,
        rounds=args.rounds,
        seed=args.seed,
        grid_points=args.grid_points,
        emit_csv=not args.no_csv,
        emit_summary=not args.no_summary,
        compare=args.compare,
    )
    try:
        scenario = build_scenario(run)
        metrics = run_scenario(scenario)
        comparison = compare_schemes(scenario, DEFAULT_COMPARISON) if run.compare else None
    except FemtoError as exc:
        print(f"femtocoord: error: {exc}", file=sys.stderr)
        return 2
    try:
        written = emit_results(metrics, scenario, run, comparison)
    except OSError as exc:
        print(f"femtocoord: cannot write results: {exc}", file=sys.stderr)
        return 1
    for path in written:
        log.info("wrote %s", path)
    if comparison is not None:
        sys.stdout.write(comparison_csv(comparison))
    return 0
