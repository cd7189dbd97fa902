"""Batch command line front end.

Configuration is a flat ``section.key = value`` text file; ``--set`` entries
override it.  Every command writes its reports into ``--out`` and exits with
0 (all checks pass), 1 (an invariant or assumption fails) or 2 (usage or
configuration error).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import axialfourier as af
from . import carleman as cm
from . import stability as st
from .domain import gamma_star, make_grid, neumann_trace
from .forward import AdmissibilityError, SolverError, SymmetrizationError
from .plots import plot_svg
from .weights import WeightError, build_weights, check_assumption, minimal_gamma_star

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

# key -> (type, default); stability-sweep overrides the axial defaults, see _experiment
DEFAULTS = {
    "grid.nxprime": (int, 33),
    "grid.naxial": (int, 129),
    "grid.ntime": (int, 65),
    "domain.X": (float, 4.0),
    "domain.T": (float, 1.0),
    "domain.ell": (float, 1.0),
    "domain.L": (float, 2.0),
    "weights.x0": (float, -0.5),
    "weights.r": (float, 2.0),
    "weights.lambda": (float, 0.1),
    "carleman.s_min": (float, 2.0),
    "carleman.s_max": (float, 40.0),
    "carleman.s_count": (int, 13),
    "carleman.members": (int, 3),
    "carleman.amplitude": (float, 1.0),
    "carleman.workers": (int, 1),
    "fourier.s": (float, 5.0),
    "fourier.levels": (int, 3),
    "stability.family_size": (int, 20),
    "stability.amplitude": (float, 0.5),
    "stability.bumps": (int, 2),
    "stability.p": (float, 0.5),
    "stability.M": (float, 10.0),
    "stability.alpha": (float, 1.0),
    "stability.s": (float, 5.0),
    "stability.u0_imag": (float, 0.0),
    "stability.workers": (int, 1),
    "recon.mu": (float, 1e-6),
    "recon.max_iters": (int, 500),
    "recon.amplitude": (float, 0.5),
    "recon.noise": (str, "0,0.01"),
}

STABILITY_AXIAL = {"domain.X": 8.0, "grid.naxial": 257}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    subcommand: str
    config_path: Path | None
    out: Path
    seed: int
    overrides: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)
    explicit: set = field(default_factory=set)

    def __getitem__(self, key):
        return self.values[key]


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value'")
        k, v = (x.strip() for x in line.split("=", 1))
        out[k] = v
    return out


def _coerce(key: str, raw: str):
    if key not in DEFAULTS:
        raise ConfigError(f"unknown configuration key {key!r}")
    typ = DEFAULTS[key][0]
    try:
        return typ(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot read {raw!r} as {typ.__name__}") from None


def build_run_config(args) -> RunConfig:
    raw = {}
    path = Path(args.config) if args.config else None
    if path is not None:
        if not path.is_file():
            raise ConfigError(f"config file {path} does not exist")
        raw.update(parse_config_text(path.read_text()))
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = (x.strip() for x in item.split("=", 1))
        overrides[k] = v
    raw.update(overrides)
    values = {k: d for k, (_, d) in DEFAULTS.items()}
    for k, v in raw.items():
        values[k] = _coerce(k, v)
    return RunConfig(args.command, path, Path(args.out), int(args.seed), overrides, values, set(raw))


# ---------------------------------------------------------------- writers

def _dump_json(obj) -> str:
    return json.dumps(st._finite(obj), sort_keys=True, indent=1) + "\n"


def _write(out: Path, name: str, text: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


def _grid(rc: RunConfig, symmetric=True):
    return make_grid((0.0, 1.0), rc["domain.X"], rc["domain.T"], rc["grid.nxprime"],
                     rc["grid.naxial"], rc["grid.ntime"], symmetric_time=symmetric,
                     L=rc["domain.L"], ell=rc["domain.ell"])


def _weights(rc: RunConfig):
    return build_weights(rc["weights.x0"], rc["weights.r"], rc["weights.lambda"], rc["domain.T"])


# ---------------------------------------------------------------- commands

def cmd_check_weights(rc: RunConfig) -> int:
    grid = _grid(rc)
    try:
        w = _weights(rc)
    except WeightError as exc:
        _write(rc.out, "assumption.json", _dump_json({"pass": False, "error": str(exc)}))
        print(f"weight assumption fails: {exc}", file=sys.stderr)
        return EXIT_FAIL
    rep = check_assumption(w, minimal_gamma_star(w, grid), grid)
    _write(rc.out, "assumption.json", _dump_json(rep.to_json(grid)))
    return EXIT_PASS if rep.passed else EXIT_FAIL


def _sweep(rc: RunConfig, variant: str):
    grid = _grid(rc)
    w = _weights(rc)
    S = cm.s_values(rc["carleman.s_min"], rc["carleman.s_max"], rc["carleman.s_count"])
    n = rc["carleman.members"]
    amp = rc["carleman.amplitude"]
    if variant == "bounded":
        chi = cm.CutoffChi(rc["domain.ell"], rc["domain.L"])
        fields = [cm.restrict_to_box(f, chi.L_O).scaled(amp) for f in cm.test_family(grid, n, rc.seed, chi)]
    else:
        fields = [f.scaled(amp) for f in cm.test_family(grid, n, rc.seed)]
    return cm.carleman_sweep(fields, w, variant, S, workers=rc["carleman.workers"])


def cmd_carleman(rc: RunConfig, variant: str) -> int:
    code = cmd_check_weights(rc)
    if code != EXIT_PASS:
        return code
    res = _sweep(rc, variant)
    _write(rc.out, f"sweep_{variant}.csv", res.to_csv())
    summary = res.summary()
    _write(rc.out, f"summary_{variant}.json", _dump_json(summary))
    series = []
    by_member = {}
    for member, rep in res.rows:
        by_member.setdefault(member, []).append((rep.s, rep.ratio))
    for member, pts in sorted(by_member.items()):
        series.append((f"member {member}", [p[0] for p in pts], [p[1] for p in pts]))
    _write(rc.out, f"ratio_{variant}.svg",
           plot_svg(series, f"{variant}: LHS / RHS against s", "s", "ratio", logx=True, logy=True))
    finite = [r for _, r in res.rows if np.isfinite(r.ratio)]
    ok = all(np.isfinite(r.lhs) and np.isfinite(r.rhs) for _, r in res.rows)
    if not finite and summary["skipped"] == len(res.rows):
        return EXIT_PASS  # degenerate family, every row skipped
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_fourier_check(rc: RunConfig) -> int:
    grid = _grid(rc)
    w = _weights(rc)
    study = af.residual_study(grid, w, rc["fourier.s"], rc.seed, rc["fourier.levels"],
                              gamma_points=(0, grid.n_xprime - 1))
    f = af.smooth_test_field(grid, rc.seed)
    tr = neumann_trace(f, gamma_star(grid, [0, grid.n_xprime - 1]))
    a, b = af.isometry_boundary(tr)
    iso = abs(a - b) / b if b > 0 else abs(a - b)
    study["boundary_isometry"] = {"tolerance_class": af.EXACT, "relative_residual": [iso],
                                  "pass": bool(iso <= af.EXACT_TOL)}
    _write(rc.out, "fourier.json", _dump_json(study))
    return EXIT_PASS if all(e["pass"] for e in study.values()) else EXIT_FAIL


def _experiment(rc: RunConfig, axial_defaults: dict | None = None) -> st.ExperimentConfig:
    vals = dict(rc.values)
    for k, v in (axial_defaults or {}).items():
        if k not in rc.explicit:
            vals[k] = v
    return st.ExperimentConfig(
        p=vals["stability.p"], M=vals["stability.M"], ell=vals["domain.ell"], L=vals["domain.L"],
        alpha=vals["stability.alpha"], T=vals["domain.T"], X=vals["domain.X"],
        n_xprime=vals["grid.nxprime"], n_axial=vals["grid.naxial"], n_time=vals["grid.ntime"],
        x0=vals["weights.x0"], r=vals["weights.r"], lam=vals["weights.lambda"],
        s=vals["stability.s"], family_size=vals["stability.family_size"],
        amplitude=vals["stability.amplitude"], bumps=vals["stability.bumps"], seed=rc.seed)


def _member(cfg: st.ExperimentConfig, k: int, u0_imag: float):
    rng = np.random.default_rng([cfg.seed, k])
    pair = st.sample_admissible_pair(cfg, rng)
    u0 = st.sample_initial_state(cfg, rng)
    if u0_imag:
        u0 = st.InitialState(u0.u0 + 1j * u0_imag * u0.u0, u0.alpha, u0.ell)
    return st.run_stability(cfg, pair, u0, seed=k)


def cmd_stability(rc: RunConfig) -> int:
    cfg = _experiment(rc, STABILITY_AXIAL)
    imag = rc["stability.u0_imag"]
    try:
        if rc["stability.workers"] > 1:
            from concurrent.futures import ThreadPoolExecutor
            with ThreadPoolExecutor(max_workers=rc["stability.workers"]) as ex:
                reports = list(ex.map(lambda k: _member(cfg, k, imag), range(cfg.family_size)))
        else:
            reports = [_member(cfg, k, imag) for k in range(cfg.family_size)]
    except (SymmetrizationError, AdmissibilityError, SolverError, st.ExperimentError) as exc:
        _write(rc.out, "error.json", _dump_json({"error": type(exc).__name__, "message": str(exc)}))
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _write(rc.out, "family.csv", st.family_csv(reports))
    for r in reports:
        _write(rc.out, f"seed_{r.seed:03d}.json", r.dumps() + "\n")
    summary = st.empirical_constants(reports)
    _write(rc.out, "summary.json", _dump_json(summary))
    series = [("(eq1a)", [r.rhs_eq1a for r in reports], [r.lhs for r in reports]),
              ("(eqa2)", [r.neumann_axis for r in reports], [r.lhs for r in reports])]
    _write(rc.out, "scatter.svg", plot_svg(series, "stability family", "RHS", "LHS",
                                           logx=True, logy=True, lines=False, diagonal=True))
    ok = all(r.lhs == 0.0 or (np.isfinite(r.ratio_eq1a) and np.isfinite(r.ratio_eqa2))
             for r in reports)
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_reconstruct(rc: RunConfig) -> int:
    cfg = replace(_experiment(rc), bumps=1, amplitude=rc["recon.amplitude"])
    try:
        noises = [float(x) for x in rc["recon.noise"].split(",") if x.strip()]
    except ValueError:
        raise ConfigError("recon.noise must be a comma separated list of numbers") from None
    rng = np.random.default_rng([rc.seed, 0])
    q_true, _ = st.sample_admissible_pair(cfg, rng)
    u0 = st.sample_initial_state(cfg, rng)
    grid = cfg.grid().half()
    rows = []
    for k, noise in enumerate(noises):
        data = st.synthetic_data(cfg, q_true, u0, noise, np.random.default_rng([rc.seed, 1, k]))
        res = st.reconstruct_potential(data, cfg, u0, mu=rc["recon.mu"], max_iters=rc["recon.max_iters"])
        delta = res.potential.values - res.potential.p
        rows.append({"noise": noise, "relative_error": st.relative_error(res.potential, q_true, grid, cfg.ell),
                     "iterations": res.iterations, "misfit": res.misfit, "converged": res.converged,
                     "perturbation_sup": float(np.max(np.abs(delta)))})
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(("noise", "relative_error", "iterations", "misfit"))
    for r in rows:
        wr.writerow([repr(r["noise"]), repr(float(r["relative_error"])), r["iterations"], repr(r["misfit"])])
    _write(rc.out, "error_vs_noise.csv", buf.getvalue())
    _write(rc.out, "reconstruct.json", _dump_json({"mu": rc["recon.mu"], "runs": rows}))
    return EXIT_PASS if all(np.isfinite(r["relative_error"]) for r in rows) else EXIT_FAIL


COMMANDS = {
    "check-weights": cmd_check_weights,
    "carleman-bounded": lambda rc: cmd_carleman(rc, "bounded"),
    "carleman-cyl": lambda rc: cmd_carleman(rc, "cylinder"),
    "fourier-check": cmd_fourier_check,
    "stability-sweep": cmd_stability,
    "reconstruct": cmd_reconstruct,
}


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wavecarleman", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="flat 'section.key = value' configuration file")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a configuration key")
    return ap


def main(argv=None) -> int:
    ap = make_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    try:
        rc = build_run_config(args)
        return COMMANDS[rc.subcommand](rc)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (WeightError, st.ExperimentError, cm.CarlemanError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
