"""Command line pipeline: check, weights, fictitious HUM, operator extraction, composition.

Configuration and reports are JSON; fields are written as CSV with columns
(t, x, component, value).  Exit codes: 0 success, 2 not solvable, 3 numeric
failure, 4 configuration error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys as _sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .algebra import (SolvabilityReport, check_rank_condition, dulmage_mendelsohn, extract_inverse_operator,
                      maximum_matching, pipeline_order, verify_right_inverse)
from .algebra.counting import P_MAX_DEFAULT
from .algebra.pattern import SparsePattern
from .algebra.solvability import RCOND_MIN
from .carleman import (WeightConfig, build_cutoffs, build_eta0, build_weights, compute_s1, eval_rho,
                       eval_weights, log_regularity_constant, weight_bound_diagnostics)
from .compose import combine_and_verify, synthesize_reduced, verify_algebraic_residual
from .errors import ConfigError, FictitiousControlError
from .hum import (K_SCHEDULE, HumProblem, adjoint_zero_bound_probe, cost_identity_check, observability_probe,
                  penalty_sweep, regularity_norm)
from .model import CoupledSystem, validate_system
from .pde import Grid

EXIT_OK, EXIT_NOT_SOLVABLE, EXIT_NUMERIC, EXIT_CONFIG = 0, 2, 3, 4

SECTIONS = {
    "system": {"m", "n", "c", "D", "G", "A", "T", "L", "omega"},
    "grid": {"Nx", "Nt"},
    "weights": {"lambda", "sigma", "K", "C_generic", "s0"},
    "hum": {"ks", "cg_tol", "cg_max", "probe_samples"},
    "algebra": {"p_max", "rank_tol"},
    "initial": {"profile", "amplitudes"},
    "outputs": {"directory", "csv"},
}
TOP_LEVEL = set(SECTIONS) | {"seed"}
PROFILES = ("sin", "sin3", "random")
CSV_FIELDS = ("y", "u", "v", "y_tilde", "y_hat")


@dataclass(frozen=True)
class GridConfig:
    Nx: int = 100
    Nt: int = 200


@dataclass(frozen=True)
class HumConfig:
    ks: tuple = K_SCHEDULE
    cg_tol: float = 1e-10
    cg_max: int = 2000
    probe_samples: int = 0


@dataclass(frozen=True)
class AlgebraConfig:
    p_max: int = P_MAX_DEFAULT
    rank_tol: float = RCOND_MIN


@dataclass(frozen=True)
class InitialConfig:
    profile: str = "sin3"
    amplitudes: Optional[tuple] = None


@dataclass(frozen=True)
class OutputConfig:
    directory: Optional[str] = None
    csv: tuple = ("y", "u", "v")


@dataclass(frozen=True)
class PipelineConfig:
    system: CoupledSystem
    grid: GridConfig = field(default_factory=GridConfig)
    weights: WeightConfig = field(default_factory=WeightConfig)
    hum: HumConfig = field(default_factory=HumConfig)
    algebra: AlgebraConfig = field(default_factory=AlgebraConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    outputs: OutputConfig = field(default_factory=OutputConfig)
    seed: int = 0

    def to_dict(self) -> dict:
        s = self.system
        w = self.weights
        return {
            "system": s.to_dict(),
            "grid": {"Nx": self.grid.Nx, "Nt": self.grid.Nt},
            "weights": {"lambda": w.lam, "sigma": w.sigma, "K": w.K, "C_generic": w.C_generic,
                        "s0": w.s0_override},
            "hum": {"ks": list(self.hum.ks), "cg_tol": self.hum.cg_tol, "cg_max": self.hum.cg_max,
                    "probe_samples": self.hum.probe_samples},
            "algebra": {"p_max": self.algebra.p_max, "rank_tol": self.algebra.rank_tol},
            "initial": {"profile": self.initial.profile,
                        "amplitudes": None if self.initial.amplitudes is None else list(self.initial.amplitudes)},
            "outputs": {"directory": self.outputs.directory, "csv": list(self.outputs.csv)},
            "seed": self.seed,
        }

    def grid_obj(self) -> Grid:
        return Grid.for_system(self.system, self.grid.Nx, self.grid.Nt)


# parsing ----------------------------------------------------------------------

def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _system_from(doc: dict, errs: list) -> Optional[CoupledSystem]:
    missing = [k for k in ("m", "c", "D", "G", "A") if k not in doc]
    if missing:
        errs.append(f"system: missing keys {missing}")
        return None
    m, n, c = doc["m"], doc.get("n", 1), doc["c"]
    if not (_is_int(m) and _is_int(n) and _is_int(c)):
        errs.append("system: m, n, c must be integers")
        return None
    try:
        D = np.asarray(doc["D"], dtype=float)
        G = np.asarray(doc["G"], dtype=float)
        A = np.asarray(doc["A"], dtype=float)
    except (TypeError, ValueError):
        errs.append("system: D, G, A must be numeric arrays")
        return None
    if D.shape == (m,):
        D = D.reshape(m, 1, 1) * np.eye(n)
    if G.shape == (m, m) and n == 1:
        G = G.reshape(m, m, 1)
    omega = doc.get("omega", [0.3, 0.7])
    if not (isinstance(omega, list) and len(omega) == 2 and all(_is_num(v) for v in omega)):
        errs.append("system: omega must be a pair [a, b]")
        return None
    T, L = doc.get("T", 1.0), doc.get("L", 1.0)
    if not (_is_num(T) and _is_num(L)):
        errs.append("system: T and L must be numbers")
        return None
    try:
        sys = CoupledSystem(m=m, n=n, c=c, D=D, G=G, A=A, T=float(T), L=float(L), omega=tuple(omega))
    except FictitiousControlError as exc:
        errs.append(f"system: {exc}")
        return None
    report = validate_system(sys)
    for v in report.violations:
        msg = "omega not strictly interior" if v.label == "omega" else v.label
        errs.append(f"system: {msg} ({v.detail})")
    return sys


def config_from_dict(doc) -> PipelineConfig:
    """Validate a configuration document, collecting every violation before raising."""
    errs: list[str] = []
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    for key in sorted(set(doc) - TOP_LEVEL):
        errs.append(f"unknown key '{key}'")
    for sec, allowed in SECTIONS.items():
        body = doc.get(sec, {})
        if body is None:
            body = {}
        if not isinstance(body, dict):
            errs.append(f"{sec}: must be an object")
            continue
        for key in sorted(set(body) - allowed):
            errs.append(f"unknown key '{sec}.{key}'")
    if "system" not in doc:
        errs.append("missing section 'system'")
        raise ConfigError(errs)
    sec = {s: (doc.get(s) or {}) if isinstance(doc.get(s) or {}, dict) else {} for s in SECTIONS}

    system = _system_from(sec["system"], errs)

    g = sec["grid"]
    Nx, Nt = g.get("Nx", GridConfig.Nx), g.get("Nt", GridConfig.Nt)
    if not (_is_int(Nx) and Nx >= 3):
        errs.append("grid: Nx must be an integer >= 3")
    if not (_is_int(Nt) and Nt >= 2):
        errs.append("grid: Nt must be an integer >= 2")

    w = sec["weights"]
    weights = None
    try:
        sigma = w.get("sigma", "auto")
        weights = WeightConfig(lam=float(w.get("lambda", 1.0)), sigma=sigma if sigma == "auto" else float(sigma),
                               K=float(w.get("K", 0.5)), C_generic=float(w.get("C_generic", 1.0)),
                               s0_override=None if w.get("s0") is None else float(w["s0"]))
    except (TypeError, ValueError) as exc:
        errs.append(f"weights: {exc}")

    h = sec["hum"]
    ks = h.get("ks", list(K_SCHEDULE))
    if not (isinstance(ks, list) and ks and all(_is_num(k) and k > 0 for k in ks)):
        errs.append("hum: ks must be a nonempty list of positive numbers")
    elif any(b <= a for a, b in zip(ks, ks[1:])):
        errs.append("hum: ks must be increasing")
    cg_tol, cg_max = h.get("cg_tol", 1e-10), h.get("cg_max", 2000)
    if not (_is_num(cg_tol) and cg_tol > 0):
        errs.append("hum: cg_tol must be positive")
    if not (_is_int(cg_max) and cg_max >= 1):
        errs.append("hum: cg_max must be a positive integer")
    probe = h.get("probe_samples", 0)
    if not (_is_int(probe) and probe >= 0):
        errs.append("hum: probe_samples must be a nonnegative integer")

    a = sec["algebra"]
    p_max, rank_tol = a.get("p_max", P_MAX_DEFAULT), a.get("rank_tol", RCOND_MIN)
    if not (_is_int(p_max) and p_max >= 0):
        errs.append("algebra: p_max must be a nonnegative integer")
    if not (_is_num(rank_tol) and rank_tol > 0):
        errs.append("algebra: rank_tol must be positive")

    ini = sec["initial"]
    profile, amps = ini.get("profile", "sin3"), ini.get("amplitudes")
    if profile not in PROFILES:
        errs.append(f"initial: profile must be one of {list(PROFILES)}")
    if amps is not None:
        if not (isinstance(amps, list) and all(_is_num(v) for v in amps)):
            errs.append("initial: amplitudes must be a list of numbers")
        elif system is not None and len(amps) != system.m:
            errs.append(f"initial: {len(amps)} amplitudes for m={system.m}")

    out = sec["outputs"]
    csv = out.get("csv", ["y", "u", "v"])
    if not (isinstance(csv, list) and all(f in CSV_FIELDS for f in csv)):
        errs.append(f"outputs: csv entries must be among {list(CSV_FIELDS)}")
    directory = out.get("directory")
    if directory is not None and not isinstance(directory, str):
        errs.append("outputs: directory must be a string")

    seed = doc.get("seed", 0)
    if not (_is_int(seed) and seed >= 0):
        errs.append("seed must be a nonnegative integer")

    # the nested control regions must resolve at this grid for the pipeline order
    if system is not None and not errs and system.n == 1:
        try:
            p = pipeline_order(system, p_max)
        except FictitiousControlError:
            p = None
        if p is not None:
            dx = system.L / (Nx + 1)
            try:
                build_cutoffs(system.omega, p, dx=dx)
            except FictitiousControlError as exc:
                errs.append(f"grid: Nx={Nx} too coarse for omega at p={p} ({exc})")

    if errs:
        raise ConfigError(errs)
    return PipelineConfig(
        system=system, grid=GridConfig(Nx=Nx, Nt=Nt), weights=weights,
        hum=HumConfig(ks=tuple(float(k) for k in ks), cg_tol=float(cg_tol), cg_max=cg_max, probe_samples=probe),
        algebra=AlgebraConfig(p_max=p_max, rank_tol=float(rank_tol)),
        initial=InitialConfig(profile=profile, amplitudes=None if amps is None else tuple(float(v) for v in amps)),
        outputs=OutputConfig(directory=directory, csv=tuple(csv)), seed=seed,
    )


def parse_config(path) -> PipelineConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    return config_from_dict(doc)


# pipeline ---------------------------------------------------------------------

def initial_state(cfg: PipelineConfig, grid: Grid) -> np.ndarray:
    m = cfg.system.m
    amps = np.ones(m) if cfg.initial.amplitudes is None else np.asarray(cfg.initial.amplitudes)
    s = np.sin(np.pi * grid.x / grid.L)
    if cfg.initial.profile == "sin":
        base = np.tile(s, (m, 1))
    elif cfg.initial.profile == "sin3":
        base = np.tile(s ** 3, (m, 1))
    else:
        rng = np.random.default_rng(cfg.seed)
        modes = np.array([np.sin((j + 1) * np.pi * grid.x / grid.L) for j in range(5)])
        base = (rng.standard_normal((m, 5)) / np.arange(1, 6) ** 2) @ modes * s ** 2
    return amps[:, None] * base


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def run_check(cfg: PipelineConfig) -> SolvabilityReport:
    return check_rank_condition(cfg.system, cfg.algebra.p_max, cfg.algebra.rank_tol)


def weight_diagnostics(cfg: PipelineConfig, p: int, grid: Grid):
    sys = cfg.system
    wcfg = WeightConfig(lam=cfg.weights.lam, sigma=cfg.weights.sigma, p=p, s0_override=cfg.weights.s0_override,
                        K=cfg.weights.K, C_generic=cfg.weights.C_generic)
    cut = build_cutoffs(sys.omega, p, dx=grid.dx)
    eta = build_eta0(sys.L, cut.omegas[-1], p)
    w = build_weights(wcfg, eta, sys.T)
    s1 = compute_s1(wcfg, eta, sys.T)
    rho = eval_rho(w, grid.t[:, None], grid.x[None, :])
    bounds = [weight_bound_diagnostics(w, float(w.exponent), r) for r in range(p + 3)]
    info = {
        "p": p, "exponent": w.exponent, "s1": w.s1, "sigma": w.sigma,
        "s1_admissible": s1.admissible, "s1_explicit": s1.explicit,
        "eta_kappa": eta.kappa, "eta_center": eta.center,
        "omegas": [list(o) for o in cut.omegas], "theta_support": list(cut.support),
        "rho_max": float(rho.max()), "log_C_K": log_regularity_constant(w, cfg.weights.K),
        "weight_bounds": [{"r": b.r, "time": b.time_constant, "space": b.space_constant, "finite": b.finite}
                          for b in bounds],
    }
    return w, cut, info


def _write_fields(cfg: PipelineConfig, out: Path, fields: dict) -> dict:
    rows = {}
    for name in cfg.outputs.csv:
        if name in fields:
            rows[name] = fields[name].to_csv(out / f"{name}.csv", label="value")
    return rows


@dataclass
class PipelineResult:
    report: dict
    exit_code: int
    fields: dict = field(default_factory=dict)


def run_synthesize(cfg: PipelineConfig, threads: int = 1, out: Optional[Path] = None) -> PipelineResult:
    """check -> weights -> fictitious HUM -> operator extraction -> composition."""
    sys = cfg.system
    timings: dict = {}
    report: dict = {"version": __version__, "config": cfg.to_dict(), "errors": {}}
    fields: dict = {}

    def stage(name, fn):
        t0 = time.perf_counter()
        try:
            return fn()
        finally:
            timings[name] = time.perf_counter() - t0

    code = EXIT_OK
    try:
        sol = stage("check", lambda: run_check(cfg))
        report["solvability"] = sol.to_dict()
        if sol.verdict != "solvable":
            report["status"] = sol.verdict
            code = EXIT_NOT_SOLVABLE
            return PipelineResult(report, code)

        p = stage("order", lambda: pipeline_order(sys, cfg.algebra.p_max))
        grid = cfg.grid_obj()
        w, cut, winfo = stage("weights", lambda: weight_diagnostics(cfg, p, grid))
        report["weights"] = winfo

        prob = stage("assemble", lambda: HumProblem.build(sys, grid, w, cut))
        y0 = initial_state(cfg, grid)
        sweep = stage("hum", lambda: penalty_sweep(prob, y0, cfg.hum.ks, cfg.hum.cg_tol, cfg.hum.cg_max,
                                                    threads=threads))
        ny0 = math.sqrt(grid.dx * float(np.sum(y0 ** 2)))
        runs = []
        for r in sweep.runs:
            d = r.summary()
            d.update(cost_identity=cost_identity_check(r, y0), adjoint_zero_ratio=adjoint_zero_bound_probe(r, y0),
                     terminal_ratio=r.terminal_norm / ny0 if ny0 > 0 else 0.0,
                     regularity_norm=regularity_norm(prob, r, cfg.weights.K))
            runs.append(d)
        hum = sweep.summary()
        hum["runs"] = runs
        hum["initial_norm"] = ny0
        if cfg.hum.probe_samples:
            probe = stage("probe", lambda: observability_probe(prob, cfg.hum.probe_samples, seed=cfg.seed))
            hum["observability"] = {"samples": probe.samples, "max_ratio": probe.max_ratio,
                                    "inf_flags": probe.inf_flags}
        report["hum"] = hum
        if not sweep.runs:
            raise FictitiousControlError("every penalty run failed")
        final = sweep.runs[-1]

        B = stage("extract", lambda: extract_inverse_operator(sys, p, cfg.algebra.rank_tol))
        resid = stage("verify_inverse", lambda: verify_right_inverse(sys, B, trials=10, p=p, seed=cfg.seed))
        report["operator"] = {"terms": len(B.coeffs), "space_order": B.max_space_order,
                              "time_order": B.max_time_order, "right_inverse_residual": resid}

        def compose():
            f = prob.source(final.v)
            yh, uh = synthesize_reduced(sys, B, f, grid)
            alg = verify_algebraic_residual(sys, yh, uh, f, grid, prob.opd)
            return f, alg, combine_and_verify(sys, final.y, yh, uh, grid, prob.opd)

        f, alg, comp = stage("compose", compose)
        report["composition"] = dict(comp.summary(), k=final.k, algebraic_residual=alg)
        fields = {"y": comp.y, "u": comp.u, "v": final.v, "y_tilde": final.y, "y_hat": comp.y_hat}
        report["status"] = "ok"
    except FictitiousControlError as exc:
        report["errors"][type(exc).__name__] = str(exc)
        report["status"] = "numeric_failure"
        code = EXIT_NUMERIC
    finally:
        report["timings"] = timings
    if out is not None and fields:
        report["csv_rows"] = _write_fields(cfg, out, fields)
    return PipelineResult(_clean(report), code, fields)


def run_weights(cfg: PipelineConfig, path, p: Optional[int] = None) -> int:
    """CSV of (t, x, alpha, xi, rho) on the interior time nodes; returns the row count."""
    sys = cfg.system
    grid = cfg.grid_obj()
    if p is None:
        p = pipeline_order(sys, cfg.algebra.p_max)
    w, _, _ = weight_diagnostics(cfg, p, grid)
    t = grid.t[1:-1]
    T, X = np.meshgrid(t, grid.x, indexing="ij")
    alpha, xi = eval_weights(w, T, X)
    rho = eval_rho(w, T, X)
    data = np.column_stack([T.ravel(), X.ravel(), alpha.ravel(), xi.ravel(), rho.ravel()])
    np.savetxt(path, data, delimiter=",", header="t,x,alpha,xi,rho", comments="", fmt="%.17g")
    return data.shape[0]


def load_pattern(path) -> SparsePattern:
    """Pattern from JSON {"rows", "cols", "entries": [[i, j, value], ...]} or whitespace triplets, 1-based."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        doc = None
    if isinstance(doc, dict):
        trip = [(int(i) - 1, int(j) - 1, float(v)) for i, j, v in doc["entries"]]
        return SparsePattern.from_triplets(trip, doc.get("rows"), doc.get("cols"))
    trip = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            i, j, v = line.split()[:3]
            trip.append((int(i) - 1, int(j) - 1, float(v)))
    return SparsePattern.from_triplets(trip)


def run_dm(path) -> dict:
    """Dulmage-Mendelsohn decomposition of an external pattern, indices 1-based."""
    try:
        pat = load_pattern(path)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot read pattern {path}: {exc}") from exc
    match = maximum_matching(pat)
    dm = dulmage_mendelsohn(pat, match)
    d = dm.to_dict()
    one = lambda xs: [int(x) + 1 for x in xs]  # noqa: E731
    out = {key: one(d[key]) for key in ("VR", "HR", "SR", "VC", "HC", "SC", "row_perm", "col_perm")}
    out["matching"] = [[r + 1, c + 1] for r, c in d["matching"]]
    out["structural_rank"] = len(d["matching"])
    out["shape"] = [pat.rows, pat.cols]
    out["block_boundaries"] = d["block_boundaries"]
    return out


# entry point ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fictitious-control", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("check", "algebraic solvability verdict"), ("synthesize", "full pipeline"),
                       ("weights", "Carleman weights as CSV"), ("dm", "Dulmage-Mendelsohn of a pattern file")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", metavar="PATH", required=name != "dm")
        p.add_argument("--out", metavar="DIR")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int, default=1)
        if name == "dm":
            p.add_argument("pattern", nargs="?", help="pattern file (JSON or triplets); defaults to --config")
    return parser


def _emit(doc: dict, out: Optional[Path], name: str):
    text = json.dumps(_clean(doc), indent=2, sort_keys=True, allow_nan=False)
    if out is not None:
        (out / name).write_text(text + "\n")
    print(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out) if args.out else None
    try:
        if args.command == "dm":
            path = args.pattern or args.config
            if path is None:
                raise ConfigError("dm needs a pattern file")
            if out is not None:
                out.mkdir(parents=True, exist_ok=True)
            _emit(run_dm(path), out, "dm.json")
            return EXIT_OK
        cfg = parse_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("seed must be nonnegative")
            cfg = replace(cfg, seed=args.seed)
        if out is None and cfg.outputs.directory:
            out = Path(cfg.outputs.directory)
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
        if args.command == "check":
            rep = run_check(cfg)
            _emit(rep.to_dict(), out, "check.json")
            return EXIT_OK if rep.verdict == "solvable" else EXIT_NOT_SOLVABLE
        if args.command == "weights":
            target = (out or Path(".")) / "weights.csv"
            rows = run_weights(cfg, target)
            _emit({"path": str(target), "rows": rows}, None, "")
            return EXIT_OK
        res = run_synthesize(cfg, threads=max(1, args.threads), out=out)
        _emit(res.report, out, "report.json")
        return res.exit_code
    except ConfigError as exc:
        print(json.dumps({"error": "config", "violations": exc.violations}, indent=2), file=_sys.stderr)
        return EXIT_CONFIG
    except FictitiousControlError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=_sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
