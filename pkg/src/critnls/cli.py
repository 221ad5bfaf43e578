"""
Command-line front end.

    critnls construct --p 4 --eps 1e-3:5e-2:log8
    critnls verify --suite profiles
    critnls resolvent-probe --data gauss --orthogonalize
    critnls evolve --init scale:0.5 --eps 0.05 --t-end 1
    critnls sweep-dichotomy --p 4 --eps 0.05 --a 0.3,0.5,0.8,1.2

Every run writes ``config.ini`` (the resolved parameters) and
``manifest.json`` (input hash, versions, per-check verdicts) into its output
directory.  Options may also come from ``--config FILE``, an INI file with a
``[run]`` section and one section per subcommand; flags take precedence.
``CRITNLS_WORKERS`` and ``CRITNLS_OUT`` override the worker count and the
output root.  Exit status: 0 all checks passed, 1 a check failed, 2 bad
configuration.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import logging
import os
import platform
import sys
import time
from dataclasses import dataclass, field as dc_field
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from . import construct as con
from . import dynamics as dyn
from . import functionals as fun
from . import profiles as prof
from . import resolvent as res
from .errors import CritNLSError, HypothesisError
from .radial import ComplexField, RealField, field, grid_for_decay, load_field, make_grid

log = logging.getLogger("critnls")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG = 0, 1, 2


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# output helpers


def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return str(x)


def write_csv(path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if np.isfinite(x) else str(x)
    return x


def write_json(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    passed: bool
    note: str = ""


@dataclass
class RunConfig:
    """Resolved parameters of one invocation."""

    command: str
    params: dict
    out: Path
    workers: int = 1
    seed: int = 0
    checks: list = dc_field(default_factory=list)

    def to_ini(self):
        cp = configparser.ConfigParser()
        cp["run"] = {"workers": str(self.workers), "seed": str(self.seed)}
        cp[self.command] = {k: _ini_value(v) for k, v in sorted(self.params.items())}
        return cp

    def digest(self):
        blob = json.dumps({"command": self.command, "params": _jsonable(self.params), "seed": self.seed},
                          sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()

    def check(self, name, value, threshold, passed, note=""):
        self.checks.append(Check(name, float(value), float(threshold), bool(passed), note))
        return passed


def _ini_value(v):
    if isinstance(v, (list, tuple)):
        return ",".join(fmt(x) for x in v)
    if v is None:
        return ""
    return fmt(v)


def _versions():
    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
            "package": pkg}


def finish(rc):
    rc.out.mkdir(parents=True, exist_ok=True)
    with open(rc.out / "config.ini", "w") as fh:
        rc.to_ini().write(fh)
    write_csv(
        rc.out / "checks.csv",
        ["check", "value", "threshold", "passed"],
        [(c.name, c.value, c.threshold, c.passed) for c in rc.checks],
    )
    manifest = {
        "command": rc.command,
        "inputs_sha256": rc.digest(),
        "versions": _versions(),
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "checks": [{"name": c.name, "value": c.value, "threshold": c.threshold,
                    "passed": c.passed, "note": c.note} for c in rc.checks],
        "passed": all(c.passed for c in rc.checks),
    }
    write_json(rc.out / "manifest.json", manifest)
    failed = [c.name for c in rc.checks if not c.passed]
    for c in rc.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}  value={c.value:.6g}  threshold={c.threshold:.6g}")
    if failed:
        print("failed checks: " + ", ".join(failed), file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


# ---------------------------------------------------------------------------
# parameter parsing


def parse_eps(text):
    """``a:b:logN`` / ``a:b:linN`` ranges or comma lists."""
    text = str(text).strip()
    try:
        if ":" in text:
            lo, hi, spec = text.split(":")
            lo, hi = float(lo), float(hi)
            if spec.startswith("log"):
                return [float(x) for x in np.geomspace(lo, hi, int(spec[3:]))]
            if spec.startswith("lin"):
                return [float(x) for x in np.linspace(lo, hi, int(spec[3:]))]
            raise ValueError(spec)
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse eps specification {text!r}") from exc


def parse_floats(text):
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse list {text!r}") from exc


def parse_bool(text):
    t = str(text).strip().lower()
    if t in ("on", "true", "yes", "1"):
        return True
    if t in ("off", "false", "no", "0"):
        return False
    raise ConfigError(f"expected on/off, got {text!r}")


DEFAULTS = {
    "construct": {"p": 4.0, "eps": "1e-3:5e-2:log8"},
    "verify": {"suite": "all"},
    "resolvent-probe": {"lam": "", "data": "gauss", "orthogonalize": False},
    "evolve": {"init": "scale:0.5", "eps": 0.05, "p": 4.0, "t_end": 1.0, "dt": 1e-3, "absorb": False,
               "scheme": "strang"},
    "sweep-dichotomy": {"p": 4.0, "eps": 0.05, "a": "0.3,0.5,0.8,1.2,1.5,1.0"},
}
ALIASES = {"verify-profiles": ("verify", {"suite": "profiles"}),
           "verify-functionals": ("verify", {"suite": "functionals"})}


def build_parser():
    ap = argparse.ArgumentParser(prog="critnls", description="Perturbed energy-critical NLS toolkit.")
    ap.add_argument("--config", help="INI file; flags override its values")
    ap.add_argument("--out", help="output directory (default $CRITNLS_OUT/<command> or runs/<command>)")
    ap.add_argument("--workers", type=int, help="worker processes for sweeps ($CRITNLS_WORKERS)")
    ap.add_argument("--seed", type=int, help="seed for randomized data")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", help="solitary waves over a range of eps")
    p.add_argument("--p", type=float)
    p.add_argument("--eps", help="list a,b,c or range lo:hi:logN / lo:hi:linN")

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("--suite", choices=["profiles", "resolvent", "functionals", "dynamics", "all"])
    sub.add_parser("verify-profiles", help="alias of verify --suite profiles")
    sub.add_parser("verify-functionals", help="alias of verify --suite functionals")

    p = sub.add_parser("resolvent-probe", help="amplification of the full resolvent versus lam")
    p.add_argument("--lam", help="comma list (default 0.02 * 2^-k, k = 0..6)")
    p.add_argument("--data", choices=["gauss", "sech", "psi", "bump", "random"])
    p.add_argument("--orthogonalize", action="store_true", default=None)

    p = sub.add_parser("evolve", help="time evolution with history CSV")
    p.add_argument("--init", help="scale:a (times Q_eps) or a saved field CSV")
    p.add_argument("--eps", type=float)
    p.add_argument("--p", type=float)
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--absorb", help="on/off")
    p.add_argument("--scheme", choices=["strang", "yoshida4"])

    p = sub.add_parser("sweep-dichotomy", help="classify u0 = a Q_eps over a list of a")
    p.add_argument("--p", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--a", help="comma list of amplitudes")
    return ap


def resolve(args, environ=None):
    environ = os.environ if environ is None else environ
    command = args.command
    params = {}
    if command in ALIASES:
        command, params = ALIASES[command][0], dict(ALIASES[command][1])
    cp = configparser.ConfigParser()
    if args.config:
        try:
            with open(args.config) as fh:
                cp.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    resolved = dict(DEFAULTS[command])
    if cp.has_section(command):
        for k, v in cp[command].items():
            k = k.replace("-", "_")
            if k not in resolved:
                raise ConfigError(f"unknown key {k!r} in section [{command}]")
            resolved[k] = v
    for k in list(resolved):
        v = getattr(args, k, None)
        if v is not None:
            resolved[k] = v
    resolved.update(params)

    run = cp["run"] if cp.has_section("run") else {}
    workers = args.workers or environ.get("CRITNLS_WORKERS") or run.get("workers", 1)
    seed = args.seed if args.seed is not None else run.get("seed", 0)
    try:
        workers, seed = int(workers), int(seed)
    except ValueError as exc:
        raise ConfigError("workers and seed must be integers") from exc
    root = Path(environ.get("CRITNLS_OUT", run.get("out", "runs")))
    out = Path(args.out) if args.out else root / command
    return RunConfig(command=command, params=_typed(command, resolved), out=out, workers=workers, seed=seed)


def _typed(command, d):
    d = dict(d)
    try:
        for k in ("p", "t_end", "dt"):
            if k in d:
                d[k] = float(d[k])
        if "eps" in d and command != "construct":
            d["eps"] = float(d["eps"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if command == "construct":
        d["eps"] = parse_eps(d["eps"])
    if command == "sweep-dichotomy":
        d["a"] = parse_floats(d["a"])
    if command == "resolvent-probe":
        d["lam"] = parse_floats(d["lam"]) if d["lam"] else [0.02 * 2.0**-k for k in range(7)]
        d["orthogonalize"] = parse_bool(d["orthogonalize"])
    if command == "evolve":
        d["absorb"] = parse_bool(d["absorb"])
    if command == "verify" and d["suite"] not in ("profiles", "resolvent", "functionals", "dynamics", "all"):
        raise ConfigError(f"unknown suite {d['suite']!r}")
    return d


# ---------------------------------------------------------------------------
# subcommands


def cmd_construct(rc):
    nl = prof.Nonlinearity.pure_power(rc.params["p"])
    rows = []
    for eps in rc.params["eps"]:
        wave = fun.wave_at(eps, nl)
        rep = fun.wave_report(wave)
        d = wave.diagnostics
        stem = f"Q_eps{eps:.6e}"
        wave.save(rc.out / "waves", stem)
        rows.append((eps, wave.lam, wave.omega, wave.omega / eps**2, d.get("omega_tilde", np.nan),
                     d["pde_residual"], rep.pohozaev_residual_K, rep.pohozaev_residual_K0, rep.action,
                     d.get("method", "")))
        rc.check(f"pde_residual[eps={eps:g}]", d["pde_residual"], 1e-8, d["pde_residual"] <= 1e-8)
        worst = max(rep.pohozaev_residual_K, rep.pohozaev_residual_K0)
        rc.check(f"pohozaev[eps={eps:g}]", worst, 1e-8, worst <= 1e-8)
    write_csv(rc.out / "omega_table.csv",
              ["eps", "lambda", "omega", "omega_over_eps2", "omega_tilde", "pde_residual",
               "pohozaev_K", "pohozaev_K0", "action", "method"], rows)


def _suite_profiles(rc):
    rows = []
    ref = prof.make_reference_grid()
    tols = {"LambdaW_algebraic_vs_derivative": 1e-12, "int_V_psi": 1e-8, "int_grad_W_sq_minus_int_W6": 1e-8,
            "int_W6": 1e-8, "int_W5": 1e-8, "pairing_p4": 1e-8, "lambda1_p4": 1e-8, "omega1_p4": 1e-8,
            "resonance_residual_HLambdaW": 1e-6}
    for name, c, e, err in prof.identity_table(ref):
        rows.append((name, c, e, err))
        rc.check(f"profiles.{name}", err, tols[name], err <= tols[name])
    res_n = [prof.resonance_residual(make_grid(n, 400.0)) for n in (512, 1024, 2048)]
    rc.check("profiles.resonance_residual_n512", res_n[0], 1e-6, res_n[0] <= 1e-6)
    rc.check("profiles.resonance_residual_refines", res_n[-1], res_n[0], res_n[0] > res_n[1] > res_n[2])
    for p in (2.5, 3.0, 4.0, 4.9, 6.0):
        nl = prof.Nonlinearity.pure_power(p)
        val = prof.pairing_LambdaW_fW(nl, ref)
        exact = (0.5 - 3.0 / (p + 1.0)) * prof.w_power_integral(p + 1.0)
        rows.append((f"pairing_p{p:g}", val, exact, abs(val - exact)))
        rc.check(f"profiles.pairing_p{p:g}", abs(val - exact), 1e-8, abs(val - exact) <= 1e-8)
        if p == 4.0:
            rc.check("profiles.pairing_p4_value", abs(val + 2.17656), 1e-4, abs(val + 2.17656) <= 1e-4)
    write_csv(rc.out / "profiles_identities.csv", ["identity", "computed", "expected", "abs_error"], rows)


def _probe_data(kind, grid, seed=0):
    r = grid.r
    if kind == "gauss":
        return RealField(grid, np.exp(-r**2))
    if kind == "sech":
        return RealField(grid, 2.0 * np.exp(-r) / (1.0 + np.exp(-2.0 * r)))
    if kind == "psi":
        return prof.profile_set(grid).Vpsi
    if kind == "bump":
        return RealField(grid, (1.0 + r) * np.exp(-0.5 * (r - 2.0) ** 2))
    if kind == "random":
        rng = np.random.default_rng(seed)
        c = rng.normal(size=4)
        return RealField(grid, np.exp(-r**2) * (c[0] + c[1] * r + c[2] * r**2 + c[3] * r**3))
    raise ConfigError(f"unknown data {kind!r}")


def _probe_grid(lams):
    return grid_for_decay(1.0 / min(lams), r_min=200.0, h=0.01, margin=60.0)


def _suite_resolvent(rc):
    lams = np.geomspace(1e-3, 1e-1, 7)
    grid = _probe_grid(lams)
    vals = res.resonance_limit(grid, lams)
    target = 2.0 * np.sqrt(3.0 * np.pi)
    slope = res.loglog_slope(lams, vals - target)
    # intercept of the linear fit v = L + c lam over the three smallest lam
    intercept = np.polyfit(lams[:3], vals[:3], 1)[1]
    rel = abs(intercept - target) / target
    rc.check("resolvent.limit_extrapolated", rel, 1e-3, rel <= 1e-3)
    rc.check("resolvent.limit_rate", slope, 1.0, abs(slope - 1.0) <= 0.2)
    rows = [("limit", l, v) for l, v in zip(lams, vals)]
    plams = [0.02 * 2.0**-k for k in range(7)]
    pg = _probe_grid(plams)
    for kind in ("gauss", "sech", "bump", "random"):
        f = _probe_data(kind, pg, rc.seed)
        for orth in (False, True):
            amp = res.singularity_probe(plams, f, orthogonalize=orth)
            s = res.loglog_slope([a for a, _ in amp], [b for _, b in amp])
            tag = "orth" if orth else "generic"
            rows += [(f"probe_{kind}_{tag}", a, b) for a, b in amp]
            target_s = 0.0 if orth else -1.0
            rc.check(f"resolvent.probe_{kind}_{tag}_slope", s, target_s, abs(s - target_s) <= 0.15)
    write_csv(rc.out / "resolvent_checks.csv", ["series", "lam", "value"], rows)


def _suite_functionals(rc):
    nl = prof.Nonlinearity.pure_power(4)
    rows = []
    for eps in (1e-3, 1e-2):
        wave = con.construct_Q(eps, nl)
        rep = fun.wave_report(wave)
        gap, pred = fun.action_gap(eps, nl, wave=wave)
        rows.append((eps, rep.pohozaev_residual_K, rep.pohozaev_residual_K0, gap, pred, gap / pred))
        rc.check(f"functionals.pohozaev_K[eps={eps:g}]", rep.pohozaev_residual_K, 1e-8, rep.pohozaev_residual_K <= 1e-8)
        rc.check(f"functionals.pohozaev_K0[eps={eps:g}]", rep.pohozaev_residual_K0, 1e-8,
                 rep.pohozaev_residual_K0 <= 1e-8)
        rc.check(f"functionals.gap_negative[eps={eps:g}]", gap, 0.0, gap < 0)
        ok, _ = fun.ray_check(wave)
        rc.check(f"functionals.ray_maximum[eps={eps:g}]", float(ok), 1.0, ok)
        rel_i = abs(rep.I - rep.I_expanded) / abs(rep.I)
        rc.check(f"functionals.I_forms[eps={eps:g}]", rel_i, 1e-10, rel_i <= 1e-10)
    ratio = rows[0][-1]
    rc.check("functionals.gap_ratio[eps=0.001]", abs(ratio - 1.0), 0.1, abs(ratio - 1.0) <= 0.1)
    write_csv(rc.out / "functionals_checks.csv",
              ["eps", "pohozaev_K", "pohozaev_K0", "gap", "predicted_gap", "ratio"], rows)


def _suite_dynamics(rc):
    rows = []
    g = make_grid(1500, 200.0)
    cfg = dyn.EvolutionConfig(nonlinear=False, scheme="yoshida4", dt=1e-2, adaptive=False)
    u0 = ComplexField(g, np.exp(-g.r**2 / 2))
    st = dyn.evolve(dyn.initial_state(u0, cfg), 1.0, cfg).state
    s = 1.0 + 2.0j
    err = float(np.max(np.abs(st.u.values - s**-1.5 * np.exp(-g.r**2 / (2 * s)))))
    rows.append(("free_gaussian_error", err))
    rc.check("dynamics.free_gaussian", err, 1e-6, err <= 1e-6)

    nl = prof.Nonlinearity.pure_power(4)
    wave = fun.wave_at(0.05, nl)
    cons = conservation_run(wave)
    rows += [("mass_drift", cons["mass"]), ("action_drift", cons["action"]), ("virial_error", cons["virial"])]
    rc.check("dynamics.mass_drift", cons["mass"], 1e-6, cons["mass"] <= 1e-6)
    rc.check("dynamics.action_drift", cons["action"], 1e-6, cons["action"] <= 1e-6)
    rc.check("dynamics.virial", cons["virial"], 1e-3, cons["virial"] <= 1e-3)

    coh = dyn.coherence_run(con.construct_Q(0.01, nl), 5.0)
    rows += [("coherence_deviation", coh["max_deviation"]), ("phase_rate_error", coh["phase_rate_error"])]
    rc.check("dynamics.coherence[eps=0.01]", coh["max_deviation"], 1e-4, coh["max_deviation"] <= 1e-4)
    rc.check("dynamics.phase_rate[eps=0.01]", coh["phase_rate_error"], 1e-2, coh["phase_rate_error"] <= 1e-2)
    write_csv(rc.out / "dynamics_checks.csv", ["quantity", "value"], rows)


def conservation_run(wave, a=0.5, t_end=1.0, dt=1e-3, h=0.005, samples=10):
    """Drifts and virial mismatch for ``u0 = a Q`` on a closed domain."""
    grid = dyn.evolution_grid(wave.grid, 1.0, h)
    cfg = dyn.EvolutionConfig(eps=wave.eps, p=wave.nl.p, omega=wave.omega, dt=dt, adaptive=False,
                              drift_budget=np.inf, sample_every=1)
    result = dyn.evolve(dyn.initial_state(dyn.transfer(wave.Q * a, grid), cfg), t_end, cfg)
    H = result.history()
    t, P, K = H[:, 0], H[:, 4], H[:, 3]
    dP = (P[2:] - P[:-2]) / (t[2:] - t[:-2])
    idx = np.linspace(0.05 * len(dP), 0.95 * len(dP), samples).astype(int)
    rel = np.abs(dP[idx] - 2.0 * K[1:-1][idx]) / np.abs(2.0 * K[1:-1][idx])
    return {"mass": result.max_drift["mass"], "action": result.max_drift["action"], "virial": float(rel.max()),
            "virial_times": t[1:-1][idx], "virial_rel": rel}


def cmd_verify(rc):
    suite = rc.params["suite"]
    suites = {"profiles": _suite_profiles, "resolvent": _suite_resolvent,
              "functionals": _suite_functionals, "dynamics": _suite_dynamics}
    for name, fn in suites.items():
        if suite in (name, "all"):
            fn(rc)


def cmd_probe(rc):
    lams = rc.params["lam"]
    grid = _probe_grid(lams)
    f = _probe_data(rc.params["data"], grid, rc.seed)
    amp = res.singularity_probe(lams, f, orthogonalize=rc.params["orthogonalize"])
    slope = res.loglog_slope([a for a, _ in amp], [b for _, b in amp])
    write_csv(rc.out / "probe.csv", ["lam", "amplification"], amp)
    target = 0.0 if rc.params["orthogonalize"] else -1.0
    rc.check("probe_slope", slope, target, abs(slope - target) <= 0.15)


def _initial(rc, nl):
    init = rc.params["init"]
    eps = rc.params["eps"]
    wave = None
    if init.startswith("scale:"):
        try:
            a = float(init.split(":", 1)[1])
        except ValueError as exc:
            raise ConfigError(f"bad init {init!r}") from exc
        wave = fun.wave_at(eps, nl)
        u0 = ComplexField(wave.grid, a * wave.Q.values)
    else:
        try:
            f = load_field(init)
        except OSError as exc:
            raise ConfigError(f"cannot load {init}: {exc}") from exc
        u0 = ComplexField(f.grid, np.asarray(f.values, dtype=complex))
    return u0, wave


def cmd_evolve(rc):
    p = rc.params
    nl = prof.Nonlinearity.pure_power(p["p"])
    u0, wave = _initial(rc, nl)
    omega = wave.omega if wave is not None else 0.0
    grid = dyn.evolution_grid(u0.grid)
    cfg = dyn.EvolutionConfig(eps=p["eps"], p=p["p"], omega=omega, dt=p["dt"], scheme=p["scheme"],
                              absorb=p["absorb"], drift_budget=1e-6 if not p["absorb"] else 1e-4)
    state = dyn.initial_state(dyn.transfer(u0, grid), cfg)
    result = dyn.evolve(state, p["t_end"], cfg)
    H = result.history()
    write_csv(rc.out / "history.csv", list(dyn.HISTORY_FIELDS), H.tolist())
    l6_factor = H[0, 6] / max(H[-1, 6], 1e-300)
    summary = {"reason": result.reason, "trusted": result.state.trusted, "t": result.state.t,
               "max_drift": result.max_drift, "l6_decay": l6_factor,
               "supgrad_growth": float(np.max(H[:, 5]) / H[0, 5]) if H[0, 5] else np.nan,
               "K_min": float(np.min(H[:, 3]))}
    verdict = "not-classified"
    if wave is not None:
        m = dyn.observables(wave.Q, dyn.EvolutionConfig(eps=wave.eps, p=nl.p, omega=omega))["action"]
        try:
            hyp = dyn.hypothesis_check(u0, wave.eps, omega, nl, m)
            summary["hypothesis"] = hyp
            if hyp["K"] > 0 and summary["K_min"] >= 0 and l6_factor >= 10 and result.state.trusted:
                verdict = "scatter-like"
            else:
                verdict = "inconclusive"
        except HypothesisError as exc:
            verdict = "hypothesis-not-met"
            summary["note"] = str(exc)
    summary["verdict"] = verdict
    write_json(rc.out / "verdict.json", summary)
    budget = cfg.drift_budget
    rc.check("trusted", float(result.state.trusted), 1.0, result.state.trusted)
    rc.check("mass_drift", result.max_drift["mass"], budget, result.max_drift["mass"] <= budget)


def cmd_sweep(rc):
    p = rc.params
    nl = prof.Nonlinearity.pure_power(p["p"])
    base = fun.wave_at(p["eps"], nl)
    report = dyn.dichotomy_sweep(p["a"], base, workers=rc.workers)
    keys = ["a", "verdict", "hyp_S", "hyp_m", "hyp_K", "ev_l6_decay", "ev_supgrad_growth",
            "ev_supgrad_growth_half_dt", "ev_supgrad_growth_refined", "ev_horizon", "ev_mass_drift",
            "ev_action_drift"]
    rows = [[row.get(k, "") for k in keys] for row in report.rows]
    write_csv(rc.out / "dichotomy.csv", keys, rows)
    write_json(rc.out / "dichotomy.json", {"rows": report.rows, "monotone": report.monotone})
    rc.check("verdicts_monotone_in_a", float(report.monotone), 1.0, report.monotone)


COMMANDS = {"construct": cmd_construct, "verify": cmd_verify, "resolvent-probe": cmd_probe,
            "evolve": cmd_evolve, "sweep-dichotomy": cmd_sweep}


def main(argv=None, environ=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        rc = resolve(args, environ)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        COMMANDS[rc.command](rc)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CritNLSError as exc:
        rc.check(type(exc).__name__, np.nan, np.nan, False, str(exc))
    return finish(rc)


if __name__ == "__main__":
    sys.exit(main())
