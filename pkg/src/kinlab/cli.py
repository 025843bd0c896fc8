"""Command-line entry point.

Subcommands: ``toy`` (two-velocity mode runs), ``certify`` (spectral
constants and the decay certificate), ``simulate`` (kinetic run checked
against its certificate), ``limit`` (diffusion-limit scaling table),
``spectral`` (constants only) and ``conditions`` (structural condition
report).

Configuration is a flat key-value text file with dotted section prefixes
(``scenario.collision=bgk``), overridable with ``--set key=value`` and by
the dedicated flags.  Every run writes a report, machine-readable summary
and a manifest with content hashes into the output directory (default from
``KINLAB_OUT`` or ``./kinlab_out``).

Exit codes: 0 success, 2 configuration error, 3 condition failure in
strict mode, 4 numerical divergence, 5 certificate violation (observed
decay slower than certified).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import toy as toy_mod
from .equilibria import build_weights, check_conditions
from .errors import (CertificateError, ConditionError, ConfinementError,
                     IntegrationDivergedError, KinlabError, StructureViolationError)
from .operators import assemble_operator_set
from .simulator import (Scenario, build_state, diffusion_limit_check, fit_decay_rate,
                        initial_field, integrate)
from .spectral import (auxiliary_norms, certify, hardy_poincare_constant,
                       macroscopic_gap, microscopic_gap, schrodinger_gap,
                       transport_macroscopic_gap)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONDITION = 3
EXIT_DIVERGED = 4
EXIT_CERTIFICATE = 5

_SCENARIO_KEYS = {
    "scenario.collision": str, "scenario.potential": str, "scenario.profile": str,
    "scenario.n_x": int, "scenario.n_v": int, "scenario.t_end": float,
    "scenario.dt": float, "scenario.eps": float, "scenario.initial": str,
    "scenario.initial_path": str, "scenario.tail_ratio": float,
    "scenario.store_densities": bool,
}
_OTHER_KEYS = {
    "toy.kmax": int, "toy.eps": float, "toy.t_end": float, "toy.dt": float,
    "limit.eps_list": str, "limit.t_end": float,
    "run.seed": int, "run.strict": bool, "run.out": str,
    "output.plot": bool, "output.export_ops": bool,
    "tolerances.certificate": float,
}
_ALL_KEYS = {**_SCENARIO_KEYS, **_OTHER_KEYS}


class ConfigError(KinlabError):
    pass


@dataclass
class RunConfig:
    """Validated flat configuration for one subcommand invocation."""

    subcommand: str
    values: dict = field(default_factory=dict)
    out_dir: Path = Path("kinlab_out")
    seed: int = 0
    strict: bool = False

    def get(self, key, default=None):
        return self.values.get(key, default)


def _coerce(key: str, raw: str):
    typ = _ALL_KEYS[key]
    if typ is bool:
        if str(raw).lower() in ("1", "true", "yes", "on"):
            return True
        if str(raw).lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"cannot parse boolean {key}={raw!r}")
    try:
        return typ(raw)
    except ValueError as exc:
        raise ConfigError(f"cannot parse {key}={raw!r}: {exc}") from exc


def parse_config_file(path, strict: bool) -> dict:
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _ALL_KEYS:
            if strict:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            continue
        values[key] = _coerce(key, raw)
    return values


def _parse_potential(spec: str):
    kind, _, rest = spec.partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        k, _, v = item.partition("=")
        params[k.strip()] = v.strip()
    if kind in ("power", "power_law"):
        return ("power_law", float(params.get("beta", 1.0)))
    if kind == "quadratic":
        return ("quadratic", float(params.get("curvature", 1.0)))
    if kind == "table":
        if "path" not in params:
            raise ConfigError("table potential needs path=FILE")
        return ("tabulated", params["path"])
    raise ConfigError(f"unknown potential spec {spec!r}")


def _parse_profile(spec: str):
    kind, _, rest = spec.partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        k, _, v = item.partition("=")
        params[k.strip()] = v.strip()
    if kind == "maxwellian":
        return ("maxwellian", 0.0, 1)
    if kind == "polytropic":
        return ("polytropic", float(params.get("m", 0.0)), int(params.get("d", 3)))
    raise ConfigError(f"unknown profile spec {spec!r}")


def scenario_from_config(cfg: RunConfig) -> Scenario:
    sc = Scenario(seed=cfg.seed, strict=cfg.strict)
    if (p := cfg.get("scenario.potential")) is not None:
        kind, value = _parse_potential(p)
        sc.potential_kind = kind
        if kind == "power_law":
            sc.beta = value
        elif kind == "quadratic":
            sc.curvature = value
        else:
            sc.potential_path = value
    if (p := cfg.get("scenario.profile")) is not None:
        sc.profile_kind, sc.m, sc.d = _parse_profile(p)
    for key, attr in [("scenario.collision", "collision"), ("scenario.n_x", "n_x"),
                      ("scenario.n_v", "n_v"), ("scenario.t_end", "t_end"),
                      ("scenario.dt", "dt"), ("scenario.eps", "eps"),
                      ("scenario.initial", "initial"),
                      ("scenario.initial_path", "initial_path"),
                      ("scenario.tail_ratio", "tail_ratio"),
                      ("scenario.store_densities", "store_densities")]:
        if (val := cfg.get(key)) is not None:
            setattr(sc, attr, val)
    return sc


# ---------------------------------------------------------------------------
# report bundle
# ---------------------------------------------------------------------------

class ReportBundle:
    """Collects written files and seals them with a hash manifest."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.files: list[Path] = []

    def write_text(self, name: str, text: str) -> Path:
        path = self.out_dir / name
        path.write_text(text)
        self.files.append(path)
        return path

    def write_csv(self, name: str, header: str, columns: np.ndarray) -> Path:
        lines = [header]
        for row in np.atleast_2d(columns):
            lines.append(",".join(f"{val:.17e}" for val in row))
        return self.write_text(name, "\n".join(lines) + "\n")

    def write_json(self, name: str, payload: dict) -> Path:
        return self.write_text(name, json.dumps(payload, indent=2, sort_keys=True,
                                                default=_json_default) + "\n")

    def write_plot_data(self, name: str, x: np.ndarray, y: np.ndarray) -> Path:
        lines = [f"{a:.17e} {b:.17e}" for a, b in zip(x, y)]
        return self.write_text(name, "\n".join(lines) + "\n")

    def render_plot(self, name: str, x, ys: dict, logy: bool = True) -> Path | None:
        try:
            import matplotlib
            matplotlib.use("Agg")
            import matplotlib.pyplot as plt
        except ImportError:
            return None
        fig, ax = plt.subplots(figsize=(6, 4))
        for label, y in ys.items():
            ax.plot(x, y, label=label)
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel("t")
        ax.legend(loc="best", fontsize=8)
        fig.tight_layout()
        path = self.out_dir / name
        fig.savefig(path)
        plt.close(fig)
        self.files.append(path)
        return path

    def seal(self) -> Path:
        lines = []
        for path in sorted(self.files):
            digest = hashlib.sha256(path.read_bytes()).hexdigest()
            lines.append(f"{digest}  {path.name}")
        manifest = self.out_dir / "manifest.txt"
        manifest.write_text("\n".join(lines) + "\n")
        return manifest


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON-serializable: {type(obj)}")


# ---------------------------------------------------------------------------
# subcommand implementations
# ---------------------------------------------------------------------------

def _cmd_toy(cfg: RunConfig, bundle: ReportBundle) -> int:
    kmax = cfg.get("toy.kmax", 16)
    eps = cfg.get("toy.eps", 0.4)
    t_end = cfg.get("toy.t_end", 40.0)
    dt = cfg.get("toy.dt", 1e-3)
    series = toy_mod.evolve_modes(kmax, eps, t_end, dt=dt)
    fitted = {}
    for k, s in series.items():
        bundle.write_csv(f"mode_{k:03d}.csv", "t,amplitude,u,v,entropy",
                         np.column_stack([s.t, s.amplitude, s.U[:, 0], s.U[:, 1],
                                          s.entropy]))
        rate, r2 = fit_decay_rate(s.t, s.amplitude)
        fitted[k] = (rate, r2)
    kappa_ok, worst = True, 0.0
    rng = np.random.default_rng(cfg.seed)
    for _ in range(100):
        lam = rng.uniform(0.05, 0.95)
        e = rng.uniform(0.0, 1.0) * toy_mod.admissible_eps_bound(lam)
        e = max(e, 1e-6)
        ratio = toy_mod.coercivity_kappa(e, lam) / (1.0 + e)
        worst = max(worst, ratio)
        kappa_ok &= ratio < 0.2
    lines = ["toy two-velocity relaxation summary", ""]
    for k, (rate, r2) in sorted(fitted.items()):
        lines.append(f"mode {k}: fitted envelope rate {rate:.6f} (r2 {r2:.6f})")
    lines.append(f"certificate ratio bound: max kappa/(1+eps) = {worst:.6f} "
                 f"({'<' if kappa_ok else '>='} 1/5)")
    bundle.write_text("report.txt", "\n".join(lines) + "\n")
    bundle.write_json("summary.json", {
        "fitted_rates": {str(k): v[0] for k, v in fitted.items()},
        "kappa_ratio_max": worst, "kappa_ratio_below_fifth": bool(kappa_ok)})
    if cfg.get("output.plot", False):
        ks = sorted(series)
        bundle.render_plot("amplitudes.svg", series[ks[0]].t,
                           {f"k={k}": series[k].amplitude for k in ks[:4]})
    return EXIT_OK


def _certify_pipeline(cfg: RunConfig, bundle: ReportBundle):
    sc = scenario_from_config(cfg)
    state = build_state(sc)
    weights = build_weights(state, state.potential)
    report = check_conditions(state.potential, state.profile, state, weights)
    bundle.write_text("conditions.txt", "\n".join(report.lines()) + "\n")
    if cfg.strict and report.failing():
        raise ConditionError(report.failing()[0])
    ops = assemble_operator_set(state, sc.collision, kernel=sc.kernel)
    cert = certify(ops, seed=cfg.seed)
    bundle.write_text("certificate.txt", "\n".join(cert.lines()) + "\n")
    return sc, state, ops, cert


def _cmd_certify(cfg: RunConfig, bundle: ReportBundle) -> int:
    _, state, ops, cert = _certify_pipeline(cfg, bundle)
    bundle.write_json("summary.json", {
        "lambda_m": cert.lambda_m, "lambda_M": cert.lambda_M, "C_M": cert.C_M,
        "eps_star": cert.eps_star, "kappa": cert.kappa,
        "decay_rate": cert.decay_rate, "prefactor": cert.prefactor})
    if cfg.get("output.export_ops", False):
        ops.transport.export_coo(bundle.out_dir / "transport_coo.txt")
        bundle.files.append(bundle.out_dir / "transport_coo.txt")
    return EXIT_OK


def _cmd_simulate(cfg: RunConfig, bundle: ReportBundle) -> int:
    sc, state, ops, cert = _certify_pipeline(cfg, bundle)
    eps = sc.eps if sc.eps is not None else cert.eps_star
    f0 = initial_field(sc, state)
    series = integrate(ops, f0, sc.t_end, dt=sc.dt, eps=eps,
                       sample_stride=sc.sample_stride,
                       store_densities=sc.store_densities)
    bundle.write_csv("series.csv", "t,mass,norm,H,D,norm_pi,norm_perp",
                     series.columns())
    rate, r2 = fit_decay_rate(series.t, series.norm)
    tol = cfg.get("tolerances.certificate", 1e-6)
    ok = rate >= cert.decay_rate - tol
    lines = [
        f"entropy parameter eps: {eps:.12g}",
        f"certified decay rate: {cert.decay_rate:.12g}",
        f"observed decay rate: {rate:.12g} (r2 {r2:.6f})",
        f"entropy monotone: {series.entropy_monotone}",
        f"max relative entropy increase: {series.max_entropy_increase:.3e}",
        f"mass drift: {np.max(np.abs(series.mass - series.mass[0])):.3e}",
        f"certificate satisfied: {ok}",
    ]
    bundle.write_text("report.txt", "\n".join(lines) + "\n")
    bundle.write_json("summary.json", {
        "eps": eps, "certified_rate": cert.decay_rate, "observed_rate": rate,
        "fit_r2": r2, "entropy_monotone": series.entropy_monotone,
        "certificate_satisfied": bool(ok)})
    bundle.write_plot_data("norm.dat", series.t, series.norm)
    bundle.write_plot_data("entropy.dat", series.t, series.entropy)
    if cfg.get("output.plot", False):
        bundle.render_plot("decay.svg", series.t,
                           {"norm": series.norm, "entropy": series.entropy})
    return EXIT_OK if ok else EXIT_CERTIFICATE


def _cmd_limit(cfg: RunConfig, bundle: ReportBundle) -> int:
    sc = scenario_from_config(cfg)
    eps_raw = cfg.get("limit.eps_list", "0.2,0.1,0.05")
    eps_list = [float(s) for s in eps_raw.split(",") if s]
    t_end = cfg.get("limit.t_end", 1.0)
    state = build_state(sc)
    ops = assemble_operator_set(state, sc.collision, kernel=sc.kernel)
    table = diffusion_limit_check(ops, eps_list, t_end=t_end)
    rows = np.column_stack([
        np.array(table["eps"]), np.array(table["error"]),
        np.array(table["ratio"] + [np.nan])])
    bundle.write_csv("limit.csv", "eps,error,ratio_to_next", rows)
    lines = ["diffusion limit scaling"] + [
        f"eps {e:g}: error {err:.6e}" for e, err in zip(table["eps"], table["error"])
    ] + [f"ratios: {', '.join(f'{r:.3f}' for r in table['ratio'])}"]
    bundle.write_text("report.txt", "\n".join(lines) + "\n")
    bundle.write_json("summary.json", table)
    return EXIT_OK


def _cmd_spectral(cfg: RunConfig, bundle: ReportBundle) -> int:
    sc = scenario_from_config(cfg)
    state = build_state(sc)
    ops = assemble_operator_set(state, sc.collision, kernel=sc.kernel)
    lam_m = microscopic_gap(ops)
    lam_fd = macroscopic_gap(state)
    lam_tr = transport_macroscopic_gap(ops)
    n1, n2, cm = auxiliary_norms(ops, seed=cfg.seed)
    payload = {
        "microscopic_gap": lam_m, "macroscopic_gap_fd": lam_fd,
        "macroscopic_gap_transport": lam_tr,
        "norm_AT_perp": n1, "norm_AL": n2, "C_M": cm,
    }
    if state.profile.kind == "maxwellian":
        payload["schrodinger_gap"] = schrodinger_gap(state.potential, state.grid.x)
    else:
        payload["hardy_poincare_d3_alpha1"] = hardy_poincare_constant(1.0, 3)
    if ops.collision.h42_value is not None:
        payload["scattering_h42_value"] = ops.collision.h42_value
    bundle.write_text("report.txt",
                      "\n".join(f"{k}: {v:.12g}" for k, v in payload.items()) + "\n")
    bundle.write_json("summary.json", payload)
    return EXIT_OK


def _cmd_conditions(cfg: RunConfig, bundle: ReportBundle) -> int:
    sc = scenario_from_config(cfg)
    state = build_state(sc)
    weights = build_weights(state, state.potential,
                            "fast_diffusion" if sc.profile_kind == "polytropic"
                            else "standard")
    report = check_conditions(state.potential, state.profile, state, weights)
    bundle.write_text("report.txt", "\n".join(report.lines()) + "\n")
    bundle.write_json("summary.json", {
        name: {"passed": r.passed, **{k: v for k, v in r.witness.items()}}
        for name, r in report.entries.items()})
    if cfg.strict and report.failing():
        raise ConditionError(report.failing()[0])
    return EXIT_OK


_COMMANDS = {
    "toy": _cmd_toy,
    "certify": _cmd_certify,
    "simulate": _cmd_simulate,
    "limit": _cmd_limit,
    "spectral": _cmd_spectral,
    "conditions": _cmd_conditions,
}


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kinlab",
        description="certified relaxation rates for linear kinetic equations")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None)
        p.add_argument("--out", type=str, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--strict", action="store_true")
        p.add_argument("--plot", action="store_true")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any config key")
        p.add_argument("--sweep", type=str, default=None, metavar="KEY=V1,V2,...",
                       help="run once per value, in subdirectories")
        if name in ("certify", "simulate", "limit", "spectral", "conditions"):
            p.add_argument("--collision", type=str, default=None)
            p.add_argument("--potential", type=str, default=None)
            p.add_argument("--profile", type=str, default=None)
        if name == "toy":
            p.add_argument("--kmax", type=int, default=None)
            p.add_argument("--eps", type=float, default=None)
    return parser


def _config_from_args(args) -> RunConfig:
    strict = bool(args.strict)
    values = {}
    if args.config:
        values.update(parse_config_file(args.config, strict))
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = (s.strip() for s in item.split("=", 1))
        if key not in _ALL_KEYS:
            raise ConfigError(f"unknown key {key!r}")
        values[key] = _coerce(key, raw)
    for attr, key in [("collision", "scenario.collision"),
                      ("potential", "scenario.potential"),
                      ("profile", "scenario.profile"),
                      ("kmax", "toy.kmax"), ("eps", "toy.eps")]:
        if getattr(args, attr, None) is not None:
            values[key] = getattr(args, attr)
    if values.get("run.strict"):
        strict = True
    if args.plot:
        values["output.plot"] = True
    seed = args.seed if args.seed is not None else values.get("run.seed", 0)
    out = args.out or values.get("run.out") or os.environ.get("KINLAB_OUT", "kinlab_out")
    for key, val in values.items():
        if key in ("scenario.n_x", "scenario.n_v", "scenario.t_end", "scenario.dt",
                   "scenario.tail_ratio", "toy.kmax", "toy.t_end", "toy.dt",
                   "limit.t_end") and not (isinstance(val, bool)) and val is not None:
            if float(val) <= 0:
                raise ConfigError(f"{key} must be positive, got {val}")
    return RunConfig(subcommand=args.subcommand, values=values,
                     out_dir=Path(out), seed=int(seed), strict=strict)


def _run_single(cfg: RunConfig) -> int:
    bundle = ReportBundle(cfg.out_dir)
    try:
        code = _COMMANDS[cfg.subcommand](cfg, bundle)
    except ConditionError as exc:
        bundle.write_text("error.txt",
                          f"condition failure: {exc.condition}\n{exc}\n")
        bundle.seal()
        print(f"kinlab {cfg.subcommand}: condition failure: {exc.condition}",
              file=sys.stderr)
        return EXIT_CONDITION
    except (IntegrationDivergedError, StructureViolationError) as exc:
        bundle.write_text("error.txt", f"numerical divergence: {exc}\n")
        bundle.seal()
        print(f"kinlab {cfg.subcommand}: numerical divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except CertificateError as exc:
        bundle.write_text("error.txt", f"certificate failure: {exc}\n")
        bundle.seal()
        print(f"kinlab {cfg.subcommand}: certificate failure: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATE
    except ConfinementError as exc:
        bundle.write_text("error.txt", f"condition failure: H0.1/H0.2\n{exc}\n")
        bundle.seal()
        print(f"kinlab {cfg.subcommand}: condition failure: {exc}", file=sys.stderr)
        return EXIT_CONDITION
    except ValueError as exc:
        print(f"kinlab {cfg.subcommand}: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    bundle.seal()
    return code


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0
    try:
        cfg = _config_from_args(args)
        if args.sweep:
            key, _, raw = args.sweep.partition("=")
            key = key.strip()
            if key not in _ALL_KEYS:
                raise ConfigError(f"unknown sweep key {key!r}")
            worst = EXIT_OK
            for val in raw.split(","):
                sub_cfg = RunConfig(
                    subcommand=cfg.subcommand,
                    values={**cfg.values, key: _coerce(key, val.strip())},
                    out_dir=cfg.out_dir / f"{key.replace('.', '_')}_{val.strip()}",
                    seed=cfg.seed, strict=cfg.strict)
                worst = max(worst, _run_single(sub_cfg))
            return worst
        return _run_single(cfg)
    except ConfigError as exc:
        print(f"kinlab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
