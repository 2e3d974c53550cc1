"""Experiment harness: declarative sweep configs, canned presets, and
deterministic CSV/JSON artifacts.

Exit codes: 0 success, 1 invalid config, 2 size-cap violation, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .copyspace import SizeCapError
from .design import DesignErrorReport, design_error_exact, design_error_mc
from .ensembles import EnsembleSpec, spec_from_jsonable
from .entropy import renyi2_coherence, renyi2_entanglement, renyi2_stabilizer
from .registers import (
    Partition,
    PureState,
    QuditRegister,
    Region,
    basis_state,
    bell_chain_state,
    ghz_state,
    load_state,
    max_entangled_state,
    uniform_superposition,
)
from .twirl import RandomStream

JOBS_ENV_VAR = "ORBITDESIGN_JOBS"

CSV_COLUMNS = [
    "experiment_id",
    "variant",
    "n_sites",
    "t",
    "sweep_param",
    "sweep_value",
    "error",
    "method",
    "samples",
    "dispersion",
    "N2_nats",
    "C2_nats",
    "bound_thm1",
    "bound_thm2",
    "bound_thm3",
    "bound_lem4",
    "residual_scale",
    "seed",
]

SWEEP_PARAMS = ("rank", "level", "support", "samples")


class ConfigError(ValueError):
    """Invalid experiment configuration; message names the offending field."""


# ---- state and ensemble builders ------------------------------------------------

def build_state(obj: dict) -> PureState:
    """Resolve a state description: inline amplitudes, a file path, or one of
    the named constructors (basis, max_entangled, ghz, bell_chain,
    uniform_support)."""
    if not isinstance(obj, dict):
        raise ConfigError("state must be a JSON object")
    if "path" in obj:
        return load_state(obj["path"])
    if "amplitudes" in obj:
        register = QuditRegister(obj["site_dims"])
        amps = np.array([complex(re, im) for re, im in obj["amplitudes"]])
        return PureState(register, amps)
    kind = obj.get("kind")
    if kind is None:
        raise ConfigError("state needs 'amplitudes', 'path', or a constructor 'kind'")
    try:
        register = QuditRegister(obj["site_dims"])
        if kind == "basis":
            return basis_state(register, int(obj["index"]))
        if kind == "max_entangled":
            a, b = (Region(sites) for sites in obj["regions"])
            return max_entangled_state(register, (a, b), int(obj["rank"]))
        if kind == "ghz":
            return ghz_state(register, Partition(obj["partition"]), int(obj["level"]))
        if kind == "bell_chain":
            return bell_chain_state(register, Partition(obj["partition"]), obj["ranks"])
        if kind == "uniform_support":
            return uniform_superposition(register, int(obj["support"]))
    except KeyError as exc:
        raise ConfigError(f"state kind {kind!r} is missing field {exc}") from None
    raise ConfigError(f"unknown state kind {kind!r}")


def build_spec(obj: dict) -> EnsembleSpec:
    """Like ensembles.spec_from_jsonable but states may use constructor kinds."""
    if not isinstance(obj, dict) or "variant" not in obj:
        raise ConfigError("ensemble needs a 'variant' field")
    resolved = copy.deepcopy(obj)
    if resolved["variant"] in ("ent_orbit", "coh_orbit"):
        state = build_state(resolved["state"])
        resolved["state"] = {
            "site_dims": list(state.register.site_dims),
            "amplitudes": [[float(a.real), float(a.imag)] for a in state.amplitudes],
        }
    return spec_from_jsonable(resolved)


def apply_sweep(ensemble_obj: dict, param: str, value) -> dict:
    """Substitute one sweep-axis value into an ensemble description."""
    out = copy.deepcopy(ensemble_obj)
    variant = out.get("variant")
    if param == "rank":
        if variant == "ec_orbit":
            out["rank"] = value
            return out
        if variant == "markov_orbit":
            out["ranks"] = [value] * len(out["ranks"])
            return out
        state = out.get("state", {})
        if state.get("kind") == "max_entangled":
            state["rank"] = value
            return out
        if state.get("kind") == "bell_chain":
            state["ranks"] = [value] * len(state["ranks"])
            return out
        raise ConfigError(f"sweep parameter 'rank' does not apply to this {variant} ensemble")
    if param == "level":
        if variant == "ghz_orbit":
            out["level"] = value
            return out
        state = out.get("state", {})
        if state.get("kind") == "ghz":
            state["level"] = value
            return out
        raise ConfigError(f"sweep parameter 'level' does not apply to this {variant} ensemble")
    if param == "support":
        state = out.get("state", {})
        if state.get("kind") == "uniform_support":
            state["support"] = value
            return out
        raise ConfigError("sweep parameter 'support' needs a uniform_support state")
    if param == "samples":
        return out
    raise ConfigError(f"unknown sweep parameter {param!r}; expected one of {SWEEP_PARAMS}")


# ---- experiment configuration -----------------------------------------------------

@dataclass
class ExperimentConfig:
    experiment_id: str
    ensemble: dict
    t_values: list[int]
    method: str
    seed: int
    output: str
    sweep_param: str | None = None
    sweep_values: list = field(default_factory=list)
    samples: int | None = None
    batches: int = 10
    jobs: int = 1
    plot: bool = False
    tolerances: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise ConfigError("experiment config must be a JSON object")
        try:
            experiment_id = str(obj["experiment_id"])
            ensemble = obj["ensemble"]
            t_field = obj["t"]
        except KeyError as exc:
            raise ConfigError(f"config is missing required field {exc}") from None
        t_values = [int(t) for t in (t_field if isinstance(t_field, list) else [t_field])]
        if any(t < 1 for t in t_values):
            raise ConfigError("field 't': copy counts must be >= 1")
        method = obj.get("method", "exact")
        if method not in ("exact", "mc"):
            raise ConfigError(f"field 'method': expected 'exact' or 'mc', got {method!r}")
        sweep = obj.get("sweep") or {}
        sweep_param = sweep.get("param")
        sweep_values = list(sweep.get("values", []))
        if sweep_param is not None:
            if sweep_param not in SWEEP_PARAMS:
                raise ConfigError(
                    f"field 'sweep.param': {sweep_param!r} not in {SWEEP_PARAMS}"
                )
            if not sweep_values:
                raise ConfigError("field 'sweep.values': must be a nonempty list")
            if any((not isinstance(v, (int, float))) or v <= 0 for v in sweep_values):
                raise ConfigError("field 'sweep.values': values must be positive numbers")
        if sweep_param == "samples" and method != "mc":
            raise ConfigError("sweeping 'samples' requires method 'mc'")
        samples = obj.get("samples")
        if method == "mc" and samples is None and sweep_param != "samples":
            raise ConfigError("field 'samples': required for method 'mc'")
        config = cls(
            experiment_id=experiment_id,
            ensemble=ensemble,
            t_values=t_values,
            method=method,
            seed=int(obj.get("seed", 0)),
            output=str(obj.get("output", experiment_id)),
            sweep_param=sweep_param,
            sweep_values=sweep_values,
            samples=None if samples is None else int(samples),
            batches=int(obj.get("batches", 10)),
            jobs=int(obj.get("jobs", 0) or 0),
            plot=bool(obj.get("plot", False)),
            tolerances=dict(obj.get("tolerances", {})),
        )
        for _, value in config.points():
            build_spec(config.resolve_ensemble(value))  # fail fast on bad sweep points
        return config

    def resolve_ensemble(self, sweep_value) -> dict:
        if self.sweep_param is None or sweep_value is None:
            return copy.deepcopy(self.ensemble)
        value = int(sweep_value) if float(sweep_value).is_integer() else sweep_value
        return apply_sweep(self.ensemble, self.sweep_param, value)

    def points(self) -> list[tuple[int, object]]:
        values = self.sweep_values if self.sweep_param else [None]
        return [(t, v) for t in self.t_values for v in values]


# ---- running --------------------------------------------------------------------

def _run_point(config: ExperimentConfig, index: int, t: int, sweep_value) -> DesignErrorReport:
    spec = build_spec(config.resolve_ensemble(sweep_value))
    if config.method == "exact":
        report = design_error_exact(spec, t)
        report.seed = config.seed
        return report
    samples = config.samples
    if config.sweep_param == "samples":
        samples = int(sweep_value)
    stream = RandomStream(config.seed).child(index)
    return design_error_mc(spec, t, samples, stream, batches=config.batches)


def run_experiment(config: ExperimentConfig) -> list[tuple[int, object, DesignErrorReport]]:
    """Execute every sweep point; rows come back in sweep order regardless of
    the number of jobs."""
    points = config.points()
    jobs = config.jobs or int(os.environ.get(JOBS_ENV_VAR, "1") or 1)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            reports = list(
                pool.map(lambda iv: _run_point(config, iv[0], *iv[1]), enumerate(points))
            )
    else:
        reports = [_run_point(config, i, t, v) for i, (t, v) in enumerate(points)]
    return [(t, v, r) for (t, v), r in zip(points, reports)]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def report_row(
    config: ExperimentConfig, t: int, sweep_value, report: DesignErrorReport
) -> dict:
    n2 = report.entropies.get("N2_cuts") or []
    return {
        "experiment_id": config.experiment_id,
        "variant": report.variant,
        "n_sites": report.n_sites,
        "t": t,
        "sweep_param": config.sweep_param,
        "sweep_value": sweep_value,
        "error": report.error,
        "method": report.method,
        "samples": report.samples,
        "dispersion": report.dispersion,
        "N2_nats": ";".join(repr(float(x)) for x in n2) or None,
        "C2_nats": report.entropies.get("C2"),
        "bound_thm1": report.bounds.get("thm1"),
        "bound_thm2": report.bounds.get("thm2"),
        "bound_thm3": report.bounds.get("thm3"),
        "bound_lem4": report.bounds.get("lem4"),
        "residual_scale": report.residual_scale,
        "seed": config.seed,
    }


def _atomic_write(path: str, data: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def rows_to_csv(rows: list[dict]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(_fmt(row[col]) for col in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def run(config: ExperimentConfig) -> dict[str, str]:
    """Run the experiment and write <output>.csv, <output>.json, and
    optionally <output>.png. Returns the artifact paths."""
    results = run_experiment(config)
    rows = [report_row(config, t, v, rep) for t, v, rep in results]
    base = config.output
    paths = {"csv": base + ".csv", "json": base + ".json"}
    _atomic_write(paths["csv"], rows_to_csv(rows))
    sidecar = {
        "experiment_id": config.experiment_id,
        "package_version": __version__,
        "numpy_version": np.__version__,
        "seed": config.seed,
        "method": config.method,
        "tolerances": config.tolerances,
        "created_unix": time.time(),
        "ensemble": config.ensemble,
        "sweep": {"param": config.sweep_param, "values": config.sweep_values},
        "points": [
            {"t": t, "sweep_param": config.sweep_param, "sweep_value": v, **rep.to_dict()}
            for t, v, rep in results
        ],
    }
    _atomic_write(paths["json"], json.dumps(sidecar, indent=2) + "\n")
    if config.plot:
        from .plotting import render_sweep_figure

        paths["png"] = base + ".png"
        render_sweep_figure(rows, paths["png"], title=config.experiment_id)
    return paths


# ---- canned presets ------------------------------------------------------------------

def _sites(n: int) -> list[int]:
    return [2] * n


PRESETS: dict[str, dict] = {
    "bipartite-tightness": {
        "experiment_id": "bipartite-tightness",
        "description": "Rank-K maximally entangled base on 3+3 qubits, exact error vs K",
        "ensemble": {
            "variant": "ent_orbit",
            "state": {
                "kind": "max_entangled",
                "site_dims": _sites(6),
                "regions": [[0, 1, 2], [3, 4, 5]],
                "rank": 1,
            },
            "partition": [[0, 1, 2], [3, 4, 5]],
        },
        "t": [2],
        "sweep": {"param": "rank", "values": [1, 2, 4, 8]},
        "method": "exact",
        "seed": 7,
    },
    "ghz-scaling": {
        "experiment_id": "ghz-scaling",
        "description": "d-level GHZ orbit on 3 regions x 2 qubits, exact error vs d",
        "ensemble": {
            "variant": "ghz_orbit",
            "site_dims": _sites(6),
            "partition": [[0, 1], [2, 3], [4, 5]],
            "level": 2,
        },
        "t": [2],
        "sweep": {"param": "level", "values": [2, 3, 4]},
        "method": "exact",
        "seed": 7,
    },
    "markov-gluing": {
        "experiment_id": "markov-gluing",
        "description": "Bell chain [2],[2,2],[2] with interface ranks (K,K), exact error vs K",
        "ensemble": {
            "variant": "markov_orbit",
            "site_dims": _sites(4),
            "partition": [[0], [1, 2], [3]],
            "ranks": [2, 2],
        },
        "t": [2],
        "sweep": {"param": "rank", "values": [1, 2]},
        "method": "exact",
        "seed": 7,
    },
    "coherence-orbit": {
        "experiment_id": "coherence-orbit",
        "description": "Uniform-support states on 3 qubits, exact phase+permutation twirl vs m",
        "ensemble": {
            "variant": "coh_orbit",
            "state": {"kind": "uniform_support", "site_dims": _sites(3), "support": 1},
        },
        "t": [2],
        "sweep": {"param": "support", "values": [1, 2, 4, 8]},
        "method": "exact",
        "seed": 7,
    },
    "ec-orbit": {
        "experiment_id": "ec-orbit",
        "description": "Rank-K subset-phase ensemble on 3+3 qubits, exact error vs K",
        "ensemble": {
            "variant": "ec_orbit",
            "site_dims": _sites(6),
            "bipartition": [[0, 1, 2], [3, 4, 5]],
            "rank": 2,
            "phase_mode": "binary",
        },
        "t": [2],
        "sweep": {"param": "rank", "values": [2, 4, 8]},
        "method": "exact",
        "seed": 7,
    },
}


def preset_config(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")
    obj = copy.deepcopy(PRESETS[name])
    obj.pop("description", None)
    return obj


# ---- entropy report -------------------------------------------------------------------

def entropy_report(state_path: str, cuts: list[list[int]], m2: str = "auto") -> list[dict]:
    state = load_state(state_path)
    rows = []
    for sites in cuts:
        value = renyi2_entanglement(state, Region(sites))
        rows.append({"quantity": "N2", "sites": ",".join(map(str, sites)), "value_nats": value})
    rows.append({"quantity": "C2", "sites": "", "value_nats": renyi2_coherence(state)})
    qubits = all(d == 2 for d in state.register.site_dims)
    if m2 == "on" and not qubits:
        raise ConfigError("stabilizer entropy requested for a non-qubit register")
    if m2 == "on" or (m2 == "auto" and qubits):
        rows.append({"quantity": "M2", "sites": "", "value_nats": renyi2_stabilizer(state)})
    return rows


# ---- command line ----------------------------------------------------------------------

def _load_config(args) -> ExperimentConfig:
    if args.preset:
        obj = preset_config(args.preset)
    else:
        if not args.config:
            raise ConfigError("run needs a config file or --preset NAME")
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"malformed JSON in {args.config} at line {exc.lineno}, column {exc.colno}: {exc.msg}"
            ) from None
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
    if args.seed is not None:
        obj["seed"] = args.seed
    if args.output is not None:
        obj["output"] = args.output
    if args.jobs is not None:
        obj["jobs"] = args.jobs
    if args.plot:
        obj["plot"] = True
    return ExperimentConfig.from_dict(obj)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orbitdesign",
        description="Approximate state designs from constant-resource orbits",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="run an experiment config or preset")
    runp.add_argument("config", nargs="?", help="experiment config JSON file")
    runp.add_argument("--preset", help="name of a canned experiment")
    runp.add_argument("--seed", type=int, help="override the master seed")
    runp.add_argument("--output", help="override the output path prefix")
    runp.add_argument("--jobs", type=int, help=f"parallel sweep points (env {JOBS_ENV_VAR})")
    runp.add_argument("--plot", action="store_true", help="also render a PNG figure")

    entp = sub.add_parser("entropy", help="second Renyi entropies of a state file")
    entp.add_argument("state", help="state JSON file")
    entp.add_argument(
        "--cuts", nargs="*", default=[], help="comma-separated site lists, e.g. 0,1 2,3"
    )
    entp.add_argument("--m2", choices=("auto", "on", "off"), default="auto")
    entp.add_argument("--output", help="write CSV here instead of printing")

    prep = sub.add_parser("presets", help="list canned experiments")
    prep.add_argument("--show", help="print the JSON config of one preset")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            config = _load_config(args)
            paths = run(config)
            for kind, path in sorted(paths.items()):
                print(f"{kind}: {path}")
            return 0
        if args.command == "entropy":
            cuts = []
            for chunk in args.cuts:
                try:
                    cuts.append([int(s) for s in chunk.split(",") if s != ""])
                except ValueError:
                    raise ConfigError(f"bad cut {chunk!r}; expected comma-separated sites")
            rows = entropy_report(args.state, cuts, m2=args.m2)
            lines = ["quantity,sites,value_nats"]
            lines += [f"{r['quantity']},\"{r['sites']}\",{repr(r['value_nats'])}" for r in rows]
            text = "\n".join(lines) + "\n"
            if args.output:
                _atomic_write(args.output, text)
                print(f"csv: {args.output}")
            else:
                sys.stdout.write(text)
            return 0
        if args.command == "presets":
            if args.show:
                print(json.dumps(preset_config(args.show), indent=2))
            else:
                for name in sorted(PRESETS):
                    print(f"{name}: {PRESETS[name]['description']}")
            return 0
        raise ConfigError(f"unknown command {args.command!r}")
    except SizeCapError as exc:
        print(f"size cap exceeded: {exc}", file=sys.stderr)
        return 2
    except np.linalg.LinAlgError as exc:
        # numpy derives LinAlgError from ValueError; keep it ahead of that catch
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
