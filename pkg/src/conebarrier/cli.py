"""Command-line interface: configuration, dispatch and report emission.

Config files are flat ``section.key = value`` text (``#`` comments) or an
equivalent nested JSON object; unknown keys are rejected.  All outputs are
UTF-8, written atomically (write-then-rename), and byte-identical for
identical config + seed; wall-clock timings go to a separate run.log.

Exit codes: 0 success, 1 error, 2 blow-up signal.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import eigen as eigen_mod
from .barriers import build_global_barrier, certify_barrier
from .errors import BlowupError, ConebarrierError, ConfigError
from .expr import compile_scalar, compile_vector, is_zero_expression
from .geometry import build_grid, load_domain_file, unit_square
from .operators import EllipticParams, check_hypotheses, pucci_minus, pucci_plus, SymMatrix2
from .scheme import SolveConfig, solve_dirichlet, solve_u0

# schema: dotted key -> (type converter, default); None default means required
_SCHEMA = {
    "domain.file": (str, None),
    "domain.psi": (float, None),
    "domain.rbar": (float, None),
    "operator.family": (str, "trace"),
    "operator.a": (float, 1.0),
    "operator.A": (float, 1.0),
    "operator.alpha": (float, 0.0),
    "operator.h_x": (str, "0"),
    "operator.h_y": (str, "0"),
    "operator.V": (str, "0"),
    "grid.h": (float, 1.0 / 32),
    "grid.stencil_order": (int, 1),
    "solve.tol": (float, 1e-8),
    "solve.max_iter": (int, 1_000_000),
    "solve.damping": (float, 0.8),
    "solve.eps_grad": (float, 1e-8),
    "solve.blowup_threshold": (float, 1e6),
    "solve.outer_max": (int, 200),
    "problem.f": (str, "-1"),
    "problem.g": (str, "0"),
    "problem.lambda": (float, 0.0),
    "eigen.tol_lambda": (float, float("nan")),   # NaN -> per-module default
    "eigen.j_max": (int, 4),
    "eigen.bracket_lo": (float, float("nan")),
    "eigen.bracket_hi": (float, float("nan")),
    "eigen.coarsen": (int, 2),
    "barrier.apex": (int, 0),
    "barrier.samples": (int, 10000),
    "check.trials": (int, 10000),
    "seed": (int, 0),
    "output.dir": (str, "out"),
}


class RunConfig:
    """Validated flat configuration with dotted keys."""

    def __init__(self, values: dict, base_dir: Path):
        unknown = set(values) - set(_SCHEMA)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        self.base_dir = base_dir
        self._values = {}
        for key, (conv, default) in _SCHEMA.items():
            if key in values:
                try:
                    self._values[key] = conv(values[key])
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"bad value for {key}: {values[key]!r}") from exc
            else:
                self._values[key] = default

    def __getitem__(self, key: str):
        return self._values[key]

    def require(self, key: str):
        val = self._values[key]
        if val is None:
            raise ConfigError(f"config key {key} is required for this command")
        return val

    def optional_float(self, key: str):
        val = self._values[key]
        return None if val is None or (isinstance(val, float) and np.isnan(val)) else val

    @staticmethod
    def _flatten(obj, prefix=""):
        flat = {}
        for k, v in obj.items():
            dotted = f"{prefix}{k}"
            if isinstance(v, dict):
                flat.update(RunConfig._flatten(v, dotted + "."))
            else:
                flat[dotted] = v
        return flat

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        stripped = text.lstrip()
        if stripped.startswith("{"):
            try:
                data = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"bad JSON config {path}: {exc}") from exc
            if not isinstance(data, dict):
                raise ConfigError("JSON config must be an object")
            return cls(cls._flatten(data), path.parent)
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, _, val = line.partition("=")
            values[key.strip()] = val.strip()
        return cls(values, path.parent)

    # ---- construction of model objects -------------------------------

    def domain(self):
        rel = self.require("domain.file")
        path = Path(rel)
        if not path.is_absolute():
            path = self.base_dir / path
        return load_domain_file(path, self.require("domain.psi"), self.require("domain.rbar"))

    def params(self) -> EllipticParams:
        hx, hy = self["operator.h_x"], self["operator.h_y"]
        drift = None if (is_zero_expression(hx) and is_zero_expression(hy)) \
            else compile_vector(hx, hy)
        vexpr = self["operator.V"]
        pot = None if is_zero_expression(vexpr) else compile_scalar(vexpr)
        return EllipticParams(a=self["operator.a"], A=self["operator.A"],
                              alpha=self["operator.alpha"], family=self["operator.family"],
                              h=drift, V=pot)

    def solve_config(self) -> SolveConfig:
        return SolveConfig(tol=self["solve.tol"], max_iter=self["solve.max_iter"],
                           damping=self["solve.damping"], eps_grad=self["solve.eps_grad"],
                           blowup_threshold=self["solve.blowup_threshold"],
                           outer_max=self["solve.outer_max"])

    def grid(self, domain):
        return build_grid(domain, self["grid.h"], self["grid.stencil_order"])


def _atomic_write(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _write_json(path: Path, payload):
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_jsonl(path: Path, rows):
    lines = [json.dumps(row, sort_keys=True) for row in rows]
    _atomic_write(path, "\n".join(lines) + ("\n" if lines else ""))


def _atomic_csv(path: Path, gridfn):
    tmp = path.with_name(path.name + ".tmp")
    gridfn.to_csv(tmp)
    os.replace(tmp, path)


def _outdir(config: RunConfig, override) -> Path:
    out = Path(override) if override else Path(config["output.dir"])
    if not out.is_absolute():
        out = config.base_dir / out
    out.mkdir(parents=True, exist_ok=True)
    return out


def _thread_budget() -> int:
    raw = os.environ.get("CONEBARRIER_THREADS", "1")
    try:
        return max(1, min(64, int(raw)))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_solve(config: RunConfig, outdir: Path) -> int:
    domain = config.domain()
    grid = config.grid(domain)
    params = config.params()
    cfg = config.solve_config()
    f = compile_scalar(config["problem.f"])
    g = compile_scalar(config["problem.g"])
    lam = config["problem.lambda"]
    try:
        u, info = solve_dirichlet(grid, params, lam, f, g, cfg, return_info=True)
    except BlowupError as exc:
        _write_json(outdir / "solve_result.json", {
            "status": "blowup",
            "sup_norm": exc.sup_norm,
            "lambda": lam,
            "grid_h": grid.h,
            "n_nodes": grid.n_nodes,
        })
        print(f"blow-up signal: {exc}", file=sys.stderr)
        return 2
    _atomic_csv(outdir / "solution.csv", u)
    _write_jsonl(outdir / "solver_log.jsonl",
                 [{"iter": int(it), "residual": float(r), "sup_norm": float(s)}
                  for it, r, s in info.history])
    _write_json(outdir / "solve_result.json", {
        "status": "converged",
        "iterations": info.iterations,
        "residual": info.scaled_residual,
        "sup_norm": u.sup_norm(),
        "lambda": lam,
        "grid_h": grid.h,
        "n_nodes": grid.n_nodes,
    })
    return 0


def cmd_barrier(config: RunConfig, outdir: Path) -> int:
    domain = config.domain()
    params = config.params()
    apexes = domain.boundary_points(16)
    idx = config["barrier.apex"]
    if not 0 <= idx < len(apexes):
        raise ConfigError(f"barrier.apex must lie in [0, {len(apexes) - 1}]")
    z = apexes[idx]
    samples = config["barrier.samples"]
    upper = build_global_barrier(domain, z, params, sign=1)
    rep_up = certify_barrier(upper, samples=samples)
    lower = build_global_barrier(domain, z, params, sign=-1, profile=upper.local)
    rep_lo = certify_barrier(lower, samples=samples)
    lb = upper.local
    _write_json(outdir / "barrier_certification.json", {
        "apex": [float(z[0]), float(z[1])],
        "axis": [float(lb.n[0]), float(lb.n[1])],
        "params": {
            "gamma": lb.gamma, "sigma1": lb.sigma1, "sigma2": lb.sigma2,
            "C1": lb.C1, "C2": lb.C2, "beta": lb.beta, "C_psi": lb.C_psi,
            "r_o": lb.r_o, "b": lb.b, "kappa": upper.kappa,
            "pole": [float(upper.y[0]), float(upper.y[1])],
            "r1": upper.r1, "sigma": upper.sigma,
        },
        "upper": rep_up.as_dict(),
        "lower": rep_lo.as_dict(),
        "passed": bool(rep_up.passed and rep_lo.passed),
    })
    return 0 if (rep_up.passed and rep_lo.passed) else 1


def cmd_eigen(config: RunConfig, outdir: Path) -> int:
    domain = config.domain()
    grid = config.grid(domain)
    params = config.params()
    cfg = config.solve_config()
    tol_lambda = config.optional_float("eigen.tol_lambda")
    lo = config.optional_float("eigen.bracket_lo")
    hi = config.optional_float("eigen.bracket_hi")
    flags = []
    if lo is not None and hi is not None:
        lam_bisect = eigen_mod.lambda_bar_bisect(grid, params, cfg, bracket=(lo, hi),
                                                 tol_lambda=tol_lambda, flags=flags)
    else:
        lam_bisect = eigen_mod.bisect_with_coarse_seed(grid, params, cfg,
                                                       tol_lambda=tol_lambda,
                                                       coarsen=config["eigen.coarsen"],
                                                       flags=flags)
    result = eigen_mod.inverse_iteration(grid, params, cfg, tol_lambda=tol_lambda)
    agreement = abs(result.lam - lam_bisect) / max(abs(lam_bisect), 1e-300)
    ok = agreement <= 0.02
    _atomic_csv(outdir / "eigenfunction.csv", result.phi)
    _write_json(outdir / "eigen_result.json", {
        "bisection": {"lambda": lam_bisect, "method": "bisection",
                      "domain_tag": "Omega", "grid_h": grid.h, "flags": flags},
        "inverse_iteration": result.as_dict(),
        "cross_method_relative_gap": agreement,
        "agreement_within_2pct": ok,
    })
    if not ok:
        print(f"estimators disagree by {agreement:.3%} (> 2%)", file=sys.stderr)
        return 1
    return 0


def cmd_probe_gap(config: RunConfig, outdir: Path) -> int:
    domain = config.domain()
    params = config.params()
    cfg = config.solve_config()
    j_max = config["eigen.j_max"]
    tol_lambda = config.optional_float("eigen.tol_lambda")
    threads = _thread_budget()
    inner = eigen_mod.eigen_exhaustion(domain, params, j_max, "interior", cfg,
                                       grid_h=config["grid.h"],
                                       stencil_order=config["grid.stencil_order"],
                                       tol_lambda=tol_lambda, threads=threads)
    outer = eigen_mod.eigen_exhaustion(domain, params, j_max, "exterior", cfg,
                                       grid_h=config["grid.h"],
                                       stencil_order=config["grid.stencil_order"],
                                       tol_lambda=tol_lambda, threads=threads)
    rows = ["j,lambda_interior,lambda_exterior"]
    for j, (ri, ro) in enumerate(zip(inner, outer), start=1):
        rows.append(f"{j},{ri.lam!r},{ro.lam!r}")
    _atomic_write(outdir / "probe_gap.csv", "\n".join(rows) + "\n")

    tl = tol_lambda if tol_lambda is not None else \
        1e-3 * eigen_mod.default_bracket(config.grid(domain), params)[1]
    tail_in = abs(inner[-1].lam - inner[-2].lam) if j_max >= 2 else 0.0
    tail_out = abs(outer[-1].lam - outer[-2].lam) if j_max >= 2 else 0.0
    gap = inner[-1].lam - outer[-1].lam
    bar = 2.0 * tl + tail_in + tail_out
    _write_json(outdir / "probe_gap.json", {
        "interior": [r.as_dict() for r in inner],
        "exterior": [r.as_dict() for r in outer],
        "lambda_bar_estimate": inner[-1].lam,
        "lambda_e_estimate": outer[-1].lam,
        "gap_estimate": gap,
        "error_bar": bar,
        "note": ("measured gap with discretization error bars; whether the two "
                 "eigenvalues coincide on non-smooth domains is left open"),
    })
    return 0


def cmd_check(config: RunConfig, outdir: Path) -> int:
    seed = config["seed"]
    params = config.params()
    trials = config["check.trials"]
    report = {"passed": True, "checks": {}}

    hyp = check_hypotheses(params, trials=trials, seed=seed)
    report["checks"]["hypotheses"] = hyp.as_dict()
    report["passed"] &= hyp.ok

    rng = np.random.default_rng(seed + 1)
    worst_dual = worst_mono = 0.0
    for _ in range(trials):
        m = SymMatrix2(*(rng.standard_normal(3) * 2.0))
        b = rng.standard_normal((2, 2))
        nmat = SymMatrix2.from_array(b.T @ b)
        dual = abs(pucci_plus(m, params.a, params.A) + pucci_minus(-m, params.a, params.A))
        worst_dual = max(worst_dual, dual / (1.0 + abs(pucci_plus(m, params.a, params.A))))
        gain = pucci_plus(m + nmat, params.a, params.A) - pucci_plus(m, params.a, params.A)
        worst_mono = max(worst_mono, max(0.0, -gain))
    report["checks"]["pucci_duality_max_violation"] = worst_dual
    report["checks"]["pucci_monotonicity_max_violation"] = worst_mono
    report["passed"] &= worst_dual <= 1e-10 and worst_mono <= 1e-10

    # small solve battery on the config's operator
    try:
        domain = config.domain()
    except ConfigError:
        domain = unit_square(psi=np.pi / 2, rbar=1.0)
    grid = build_grid(domain, min(config["grid.h"], domain.rbar / 8.0),
                      config["grid.stencil_order"])
    cfg = dataclasses.replace(config.solve_config(), tol=max(config.solve_config().tol, 1e-8))
    zero = solve_dirichlet(grid, params, 0.0, 0.0, 0.0, cfg)
    report["checks"]["zero_data_zero_solution"] = bool(zero.sup_norm() == 0.0)
    report["passed"] &= zero.sup_norm() == 0.0
    u0 = solve_u0(grid, params, cfg)
    sign_ok = bool(u0.values.min() >= -1e-6)
    report["checks"]["torsion_nonnegative"] = sign_ok
    report["passed"] &= sign_ok
    rng2 = np.random.default_rng(seed + 2)
    comparison_ok = True
    for _ in range(10):
        bump = rng2.uniform(0.0, 1.0, grid.n_nodes)
        f2 = np.full(grid.n_nodes, -1.0)
        f1 = f2 - bump
        u1 = solve_dirichlet(grid, params, 0.0, lambda p, a=f1: a, 0.0, cfg)
        u2 = solve_dirichlet(grid, params, 0.0, lambda p, a=f2: a, 0.0, cfg)
        comparison_ok &= bool(np.min(u1.values - u2.values) >= -1e-6)
    report["checks"]["comparison_ordering"] = comparison_ok
    report["passed"] &= comparison_ok

    report["passed"] = bool(report["passed"])
    _write_json(outdir / "check_report.json", report)
    return 0 if report["passed"] else 1


_COMMANDS = {
    "solve": cmd_solve,
    "barrier": cmd_barrier,
    "eigen": cmd_eigen,
    "probe-gap": cmd_probe_gap,
    "check": cmd_check,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="conebarrier",
        description="Cone barriers, Dirichlet solvers and principal-eigenvalue "
                    "estimation on polygonal domains with the exterior cone condition.",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="path to the run configuration")
    parser.add_argument("--out", default=None, help="output directory (overrides output.dir)")
    parser.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    args = parser.parse_args(argv)

    t0 = time.time()
    try:
        config = RunConfig.from_file(args.config)
        if args.seed is not None:
            config._values["seed"] = args.seed
        outdir = _outdir(config, args.out)
        code = _COMMANDS[args.command](config, outdir)
    except (ConebarrierError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1
    with open(outdir / "run.log", "a", encoding="utf-8") as fh:
        fh.write(f"{args.command} finished with code {code} in {time.time() - t0:.2f}s\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
