"""Command-line front end: ``gaugeinterp <command> CONFIG.json [overrides]``.

Every command reads a JSON config, validates it against the bundled schema,
writes its data output (JSON or CSV) and appends diagnostics to a sidecar
JSON-lines log.  Exit codes: 0 success, 2 bad config, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(Exception):
    pass


class NumericalFailure(Exception):
    pass


# --------------------------------------------------------------- formatting

def fmt_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def dumps(obj, indent: int | None = 2, _level: int = 0) -> str:
    """JSON text with every float written to 17 significant digits."""
    pad = "" if indent is None else "\n" + " " * (indent * (_level + 1))
    end = "" if indent is None else "\n" + " " * (indent * _level)
    sep = ", " if indent is None else ","
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{" + sep.join(items) + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[" + sep.join(f"{pad}{dumps(v, indent, _level + 1)}" for v in obj) + end + "]"
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(bool(obj) if obj is not None else None)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj)
    return json.dumps(str(obj))


class SidecarLog:
    """Append-only JSON-lines diagnostics file."""

    def __init__(self, path: Path | None):
        self.path = path
        self._fh = open(path, "a", encoding="utf-8") if path else None

    def __call__(self, **record):
        if self._fh is None:
            return
        self._fh.write(dumps({"time": time.time(), **record}, indent=None) + "\n")
        self._fh.flush()

    def close(self):
        if self._fh:
            self._fh.close()


# ------------------------------------------------------------------- config

def load_schema(command: str) -> dict:
    name = command.replace("-", "_") + ".json"
    return json.loads(resources.files("gaugeinterp").joinpath("schemas", name).read_text())


def _parse_override(text: str):
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not KEY=VALUE")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def load_config(command: str, path: str, overrides=()) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    for key, value in overrides:
        cfg[key] = value
    try:
        jsonschema.validate(cfg, load_schema(command))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"schema violation at {where}: {exc.message}") from exc
    return cfg


def expand_grid(spec) -> list[float]:
    if isinstance(spec, dict):
        return [float(x) for x in np.linspace(spec["start"], spec["stop"], spec["num"])]
    return [float(x) for x in spec]


def _sidecar(cfg: dict) -> Path:
    return Path(cfg["log"]) if "log" in cfg else Path(str(cfg["output"]) + ".log.jsonl")


def _basis(cfg):
    from .link import TruncatedLinkBasis
    try:
        return TruncatedLinkBasis.from_cutoff(cfg["variant"].lower(), cfg["l_max"])
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def _chain_params(cfg, n_key="N"):
    from .chain import ChainParams
    try:
        return ChainParams(n_sites=cfg[n_key], g2=1.0 / cfg.get("g_inv2", 1.0), basis=_basis(cfg),
                           periodic=cfg.get("periodic", True), solver=cfg.get("solver", "ed"),
                           bond_dim=cfg.get("D", 22), seed=cfg.get("seed", 0),
                           max_sweeps=cfg.get("max_sweeps", 40), tol=cfg.get("tol", 1e-9))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# ------------------------------------------------------------------ commands

def cmd_gs_solve(cfg: dict, log: SidecarLog, workers: int = 1) -> int:
    from .chain import MAX_ED_DIM, fidelity_per_site, ChainState
    from .chain import ground_state
    from .link import state_omega0
    from .mps import NonConvergence
    params = _chain_params(cfg)
    if params.solver == "ed" and params.d ** params.n_sites > MAX_ED_DIM:
        raise ConfigError(f"ED dimension {params.d}^{params.n_sites} exceeds {MAX_ED_DIM}")
    try:
        res = ground_state(params)
    except NonConvergence as exc:
        log(event="nonconvergence", **{k: v for k, v in exc.diagnostics.items() if k != "history"})
        raise NumericalFailure(str(exc)) from exc
    omega = state_omega0(params.basis).coeffs
    vec = omega
    for _ in range(params.n_sites - 1):
        vec = np.kron(vec, omega)
    if res.state.kind == "dense":
        ref = ChainState(params.basis, params.n_sites, params.periodic, dense=vec)
    else:
        from .mps import MPS
        ref = ChainState(params.basis, params.n_sites, params.periodic,
                         mps=MPS.product([omega] * params.n_sites))
    out = {
        "command": "gs-solve", "variant": params.basis.variant.value, "l_max": params.basis.l_max,
        "N": params.n_sites, "g_inv2": 1.0 / params.g2, "periodic": params.periodic,
        "solver": res.solver, "D": params.bond_dim if res.solver == "dmrg" else None,
        "seed": params.seed, "energy": res.energy, "energy_density": res.energy_density,
        "residual": res.residual, "variance": res.variance, "sweeps": res.sweeps,
        "fidelity_strong_coupling": fidelity_per_site(res.state, ref),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    log(event="ground_state", energy=res.energy, residual=res.residual, variance=res.variance,
        sweeps=res.sweeps)
    if "state_output" in cfg:
        if res.state.kind == "dense":
            np.save(cfg["state_output"], res.state.dense)
        else:
            np.savez(cfg["state_output"], *res.state.mps.tensors)
    Path(cfg["output"]).write_text(dumps(out) + "\n")
    return EXIT_OK


def write_sweep_csv(rows, fh) -> None:
    from .chain import SWEEP_COLUMNS
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([fmt_float(r[c]) if isinstance(r[c], float) else r[c] for c in SWEEP_COLUMNS])


def cmd_fidelity_sweep(cfg: dict, log: SidecarLog, workers: int = 1) -> int:
    from .chain import MAX_ED_DIM, fidelity_sweep, fine_links, sweep_argmax
    params = _chain_params(cfg)
    g_grid = expand_grid(cfg["g_inv2_grid"])
    lam_grid = expand_grid(cfg["lambda_grid"])
    if any(g <= 0 for g in g_grid):
        raise ConfigError("g_inv2_grid entries must be positive")
    n_fine = fine_links(params.n_sites, params.periodic)
    if params.solver == "ed" and params.d ** n_fine > MAX_ED_DIM:
        raise ConfigError(f"fine-chain ED dimension {params.d}^{n_fine} exceeds {MAX_ED_DIM}")
    rows = fidelity_sweep(cfg["g0_inv2"], g_grid, lam_grid, params, degree=cfg.get("degree"),
                          workers=cfg.get("workers", workers), on_event=log)
    with open(cfg["output"], "w", newline="", encoding="utf-8") as fh:
        write_sweep_csv(rows, fh)
    for lam, r in sorted(sweep_argmax(rows).items()):
        log(event="argmax", **{"lambda": lam}, g_inv2=r["g_inv2"], f_finegrained=r["f_finegrained"],
            f_baseline=r["f_baseline"])
    failed = sum(bool(r["failed"]) for r in rows)
    if failed:
        log(event="failed_cells", count=failed)
        return EXIT_NUMERIC
    return EXIT_OK


def _lattice_from_cfg(spec):
    from .classical import LatticeConfig, ops_for
    from .group import as_group
    if isinstance(spec, str):
        try:
            spec = json.loads(Path(spec).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read lattice: {exc}") from exc
    try:
        if "generate" not in spec:
            return LatticeConfig.from_json({**spec, "variant": spec["variant"].lower()})
        variant = as_group(spec["variant"].lower())
        lx, ly = spec["shape"]
        periodic = spec.get("periodic", False)
        if spec["generate"] == "random":
            return LatticeConfig.random(variant, lx, ly, np.random.default_rng(spec.get("seed", 0)), periodic)
        lat = LatticeConfig.flat(variant, lx, ly, periodic)
        if spec["generate"] == "single_flux":
            x, y = spec.get("plaquette", [0, 0])
            links = lat.links.copy()
            links[x, y, 0] = ops_for(variant).phase(spec.get("flux", 1.0))
            lat = LatticeConfig(variant, links, periodic)
        return lat
    except (ValueError, KeyError, IndexError) as exc:
        raise ConfigError(f"bad lattice: {exc}") from exc


def cmd_interp(cfg: dict, log: SidecarLog, workers: int = 1) -> int:
    lat = _lattice_from_cfg(cfg["lattice"])
    m = cfg.get("iterations", 1)
    before = float(np.max(lat.fluxes())) if lat.fluxes().size else 0.0
    fine = lat.subdivide(m)
    after = float(np.max(fine.fluxes())) if fine.fluxes().size else 0.0
    log(event="interp", iterations=m, shape_in=list(lat.shape), shape_out=list(fine.shape),
        max_flux_in=before, max_flux_out=after)
    Path(cfg["output"]).write_text(dumps(fine.to_json(), indent=None) + "\n")
    if "flux_csv" in cfg:
        Path(cfg["flux_csv"]).write_text(_flux_csv(fine))
    return EXIT_OK


def _flux_csv(lat) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "flux"])
    f = lat.fluxes()
    for i in range(f.shape[0]):
        for j in range(f.shape[1]):
            w.writerow([i, j, fmt_float(f[i, j])])
    return buf.getvalue()


def _mera_records(cfg: dict, log: SidecarLog, workers: int):
    from . import mera
    from .group import as_group
    variant = as_group(cfg.get("variant", "su2").lower())
    out = []
    for i, rec in enumerate(cfg["records"]):
        kind, m = rec["observable"], rec["m"]
        seed = rec.get("seed", cfg.get("seed", 0))
        samples = rec.get("samples", cfg.get("samples", 100_000))
        methods = rec.get("methods", ["closed_form", "quadrature", "monte_carlo"])
        lam = rec.get("lambda", 1)
        try:
            if kind == "wilson_loop":
                if "loop" not in rec:
                    raise ConfigError(f"records/{i}: wilson_loop needs 'loop'")
                est = mera.wilson_loop_in_ansatz(rec["loop"], m, variant, lam=lam, samples=samples,
                                                 seed=seed)
                out.append(est.record(f"wilson_loop{[list(p) for p in rec['loop']]}", m))
                continue
            pl = [tuple(p) for p in rec.get("plaquettes", [[0, 0]])]
            if kind == "flux":
                obs = mera.PlaquetteObservable.flux(m, pl[0])
            elif kind == "flux_product":
                obs = mera.PlaquetteObservable.flux_product(m, pl)
            else:
                if "coeffs" not in rec:
                    raise ConfigError(f"records/{i}: trace_polynomial needs 'coeffs'")
                poly = np.polynomial.Polynomial(rec["coeffs"])
                obs = mera.PlaquetteObservable.trace_function(m, poly, pl[0],
                                                              label=f"coeffs={rec['coeffs']}")
            name = obs.describe()
            for method in methods:
                if method == "closed_form":
                    v = mera.expect_in_ansatz(obs, variant, lam=lam)
                    out.append({"observable": name, "m": m, "method": "closed_form", "value": v,
                                "stderr": 0.0, "samples": 0, "seed": None,
                                "prefactor": str(mera.expect_prefactor(obs))})
                else:
                    est = mera.pushforward_oracle(obs, variant, sampler=method, samples=samples,
                                                  seed=seed, lam=lam, workers=workers)
                    out.append(est.record(name, m))
        except mera.UnsupportedObservable as exc:
            raise ConfigError(f"records/{i}: {exc}") from exc
        except ValueError as exc:
            raise ConfigError(f"records/{i}: {exc}") from exc
        log(event="mera_record", index=i, observable=kind, m=m)
    return out


def cmd_mera_expect(cfg: dict, log: SidecarLog, workers: int = 1) -> int:
    records = _mera_records(cfg, log, cfg.get("workers", workers))
    Path(cfg["output"]).write_text(dumps(records) + "\n")
    return EXIT_OK


def cmd_reduce_graph(cfg: dict, log: SidecarLog, workers: int = 1) -> int:
    from .graph import GaugeGraph, GraphError, reduce_to_petal
    spec = cfg["graph"]
    if isinstance(spec, str):
        try:
            spec = json.loads(Path(spec).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read graph: {exc}") from exc
    try:
        graph = GaugeGraph.grid(*spec["grid"]) if "grid" in spec else GaugeGraph.from_json(spec)
        gates, petal, root = reduce_to_petal(graph)
    except (GraphError, ValueError, KeyError) as exc:
        raise ConfigError(f"bad graph: {exc}") from exc
    log(event="reduce_graph", vertices=len(graph.vertices), edges=len(graph.edges),
        loops=len(petal.edges), gates=len(gates))
    Path(cfg["output"]).write_text(dumps({"root": root, "loops": len(petal.edges),
                                          "petal": petal.to_json(), "gates": gates}) + "\n")
    return EXIT_OK


COMMANDS = {
    "gs-solve": cmd_gs_solve,
    "fidelity-sweep": cmd_fidelity_sweep,
    "interp": cmd_interp,
    "mera-expect": cmd_mera_expect,
    "reduce-graph": cmd_reduce_graph,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaugeinterp",
                                     description="Gauge-field interpolation and fine-graining experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run {name} from a JSON config")
        p.add_argument("config", help="path to the JSON config")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override a top-level config field (VALUE parsed as JSON when possible)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--output", help="override the output path")
        p.add_argument("--log", help="override the sidecar log path")
        p.add_argument("--workers", type=int, default=1, help="worker processes (default 1)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = []
    try:
        overrides = [_parse_override(s) for s in args.overrides]
        for key in ("seed", "output", "log"):
            if getattr(args, key) is not None:
                overrides.append((key, getattr(args, key)))
        cfg = load_config(args.command, args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log = SidecarLog(_sidecar(cfg))
    log(event="start", command=args.command, config=cfg)
    try:
        code = COMMANDS[args.command](cfg, log, workers=max(1, args.workers))
    except ConfigError as exc:
        log(event="config_error", message=str(exc))
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        log(event="numerical_failure", message=str(exc))
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    finally:
        log.close()
    return code


if __name__ == "__main__":
    sys.exit(main())
