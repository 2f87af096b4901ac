"""Command-line experiment driver.

    qstein --config run.ini [--out DIR] [--seed N] [--check-only]

The config is an INI file with an ``[experiment]`` section and, depending on
the experiment, ``[psi]`` and ``[phi]`` model sections. Each run writes one
result CSV plus ``summary.csv`` and prints one summary line. Exit status is
0 when every built-in check passes, 1 when a check fails and 2 on a
configuration or runtime error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .aep import build_separating_projector, classical_llr_trajectories, write_llr_csv, write_separating_csv
from .entropy import mean_relative_entropy_sequence
from .ergodic import component_audit, gl_decompose, write_audit_csv
from .operators import DIM_CAP, DimensionCapError, check_dim, random_density
from .pinching import hiai_petz_audit
from .states import IID, FinitelyCorrelated, MarkovLift, RotatedMarkovLift, finite_rates, hadamard, rate_report
from .testing import np_spectral_curve, stein_scan, write_stein_csv

EXPERIMENTS = ("entropy-rates", "pinch-audit", "np-curve", "stein-scan", "aep-classical", "qaep-build", "ergodic-audit")

EXPERIMENT_KEYS = {
    "name": str,
    "n": int,
    "n_max": int,
    "n_min": int,
    "epsilon": float,
    "delta": float,
    "seed": int,
    "trials": int,
    "lambda_min": float,
    "lambda_max": float,
    "lambda_count": int,
    "lambda_grid_size": int,
    "l": int,
    "out": str,
}
MODEL_KEYS = {"model", "probs", "transition", "rotation", "site_dim", "bond_dim", "seed"}
MODELS = ("iid", "markov", "rotated-markov", "fcs", "random")

REQUIRED = {
    "entropy-rates": ("n_max",),
    "pinch-audit": ("n", "trials"),
    "np-curve": ("n", "lambda_min", "lambda_max", "lambda_count"),
    "stein-scan": ("n_max", "epsilon"),
    "aep-classical": ("n", "trials"),
    "qaep-build": ("n", "epsilon"),
    "ergodic-audit": ("l", "n_max"),
}
RESULT_FILE = {
    "entropy-rates": "entropy_rates.csv",
    "pinch-audit": "pinch_audit.csv",
    "np-curve": "np_curve.csv",
    "stein-scan": "stein_scan.csv",
    "aep-classical": "llr_samples.csv",
    "qaep-build": "separating_projector.csv",
    "ergodic-audit": "ergodic_audit.csv",
}


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = ""
        if key is not None:
            where = f"key '{key}'" + (f" (line {line})" if line is not None else "") + ": "
        super().__init__(where + message)
        self.key = key
        self.line = line


@dataclass
class ExperimentConfig:
    name: str
    params: dict
    psi: dict = field(default_factory=dict)
    phi: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict, repr=False)

    def line_of(self, section: str, key: str) -> int | None:
        return self.lines.get((section, key))

    def get(self, key, default=None):
        return self.params.get(key, default)


# -- parsing ---------------------------------------------------------------------


def _line_index(text: str) -> dict:
    out, section = {}, None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"^\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            out[(section, None)] = i
            continue
        m = re.match(r"^([A-Za-z0-9_\-]+)\s*[=:]", line)
        if m and section is not None:
            out.setdefault((section, m.group(1).strip().lower()), i)
    return out


def _vector(text: str) -> np.ndarray:
    return np.array([float(x) for x in re.split(r"[,\s]+", text.strip()) if x])


def _matrix(text: str) -> np.ndarray:
    rows = [_vector(r) for r in text.split(";") if r.strip()]
    if len({len(r) for r in rows}) != 1:
        raise ValueError("ragged matrix rows")
    return np.array(rows)


def parse_config(text: str) -> ExperimentConfig:
    lines = _line_index(text)
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}", line=getattr(exc, "lineno", None)) from None
    for section in cp.sections():
        if section not in ("experiment", "psi", "phi"):
            raise ConfigError(f"unknown section [{section}]", key=section, line=lines.get((section, None)))
    if not cp.has_section("experiment"):
        raise ConfigError("missing [experiment] section")
    params = {}
    for key, raw in cp.items("experiment"):
        line = lines.get(("experiment", key))
        if key not in EXPERIMENT_KEYS:
            raise ConfigError("unknown key in [experiment]", key, line)
        try:
            params[key] = EXPERIMENT_KEYS[key](raw.strip())
        except ValueError:
            raise ConfigError(f"cannot parse {raw!r} as {EXPERIMENT_KEYS[key].__name__}", key, line) from None
    name = params.get("name")
    if name not in EXPERIMENTS:
        raise ConfigError(f"name must be one of {', '.join(EXPERIMENTS)}", "name", lines.get(("experiment", "name")))
    models = {}
    for section in ("psi", "phi"):
        models[section] = {}
        if cp.has_section(section):
            for key, raw in cp.items(section):
                if key not in MODEL_KEYS:
                    raise ConfigError(f"unknown key in [{section}]", key, lines.get((section, key)))
                models[section][key] = raw.strip()
    cfg = ExperimentConfig(name, params, models["psi"], models["phi"], lines)
    validate(cfg)
    return cfg


def _range_check(cfg: ExperimentConfig, key: str, ok, what: str):
    if key in cfg.params and not ok(cfg.params[key]):
        raise ConfigError(f"value {cfg.params[key]!r} out of range: {what}", key, cfg.line_of("experiment", key))


def build_model(cfg: ExperimentConfig, section: str):
    spec = cfg.psi if section == "psi" else cfg.phi
    line = lambda k: cfg.line_of(section, k)  # noqa: E731
    kind = spec.get("model")
    if kind not in MODELS:
        raise ConfigError(f"[{section}] model must be one of {', '.join(MODELS)}", "model", line("model"))
    try:
        if kind == "iid":
            if "probs" not in spec:
                raise ConfigError(f"[{section}] iid model needs probs", "probs", line("model"))
            return IID.diagonal(_vector(spec["probs"]))
        if kind in ("markov", "rotated-markov"):
            if "transition" not in spec:
                raise ConfigError(f"[{section}] {kind} model needs transition", "transition", line("model"))
            P = _matrix(spec["transition"])
            if kind == "markov":
                return MarkovLift(P)
            rot = spec.get("rotation", "hadamard")
            if rot != "hadamard" or P.shape[0] != 2:
                raise ConfigError("rotation must be 'hadamard' on a 2-state chain", "rotation", line("rotation"))
            return RotatedMarkovLift(P, unitary=hadamard())
        if kind == "fcs":
            return FinitelyCorrelated.random(int(spec.get("site_dim", 2)), int(spec.get("bond_dim", 2)),
                                             int(spec.get("seed", 0)))
        return None  # random: drawn per trial
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        key = next((k for k in ("probs", "transition", "site_dim", "bond_dim") if k in spec), "model")
        raise ConfigError(f"[{section}] {exc}", key, line(key)) from None


def validate(cfg: ExperimentConfig) -> None:
    for key in REQUIRED[cfg.name]:
        if key not in cfg.params:
            raise ConfigError(f"experiment {cfg.name} requires this key", key, cfg.line_of("experiment", "name"))
    pos = lambda v: v >= 1  # noqa: E731
    for key in ("n", "n_max", "n_min", "trials", "lambda_count", "lambda_grid_size", "l"):
        _range_check(cfg, key, pos, "must be >= 1")
    _range_check(cfg, "epsilon", lambda v: 0 < v < 1, "must lie in (0, 1)")
    _range_check(cfg, "delta", lambda v: v > 0, "must be positive")
    _range_check(cfg, "seed", lambda v: v >= 0, "must be nonnegative")
    _range_check(cfg, "lambda_min", lambda v: v > 0, "must be positive")
    if cfg.get("lambda_max") is not None and cfg.get("lambda_min") is not None:
        _range_check(cfg, "lambda_max", lambda v: v >= cfg.params["lambda_min"], "must be >= lambda_min")
    needs_phi = cfg.name != "pinch-audit" or cfg.phi
    if needs_phi:
        phi = build_model(cfg, "phi")
        if not isinstance(phi, IID):
            raise ConfigError("[phi] must be an iid model", "model", cfg.line_of("phi", "model"))
    psi = build_model(cfg, "psi")
    if cfg.name == "pinch-audit":
        if cfg.psi.get("model") != "random":
            raise ConfigError("pinch-audit draws random psi; set model = random", "model", cfg.line_of("psi", "model"))
        if not cfg.phi:
            raise ConfigError("pinch-audit requires a [phi] section", "phi")
    elif psi is None:
        raise ConfigError("model = random is only used by pinch-audit", "model", cfg.line_of("psi", "model"))
    if cfg.name in ("aep-classical", "ergodic-audit") and not isinstance(psi, MarkovLift):
        raise ConfigError(f"{cfg.name} needs a markov psi", "model", cfg.line_of("psi", "model"))
    if cfg.name == "aep-classical" and isinstance(psi, RotatedMarkovLift):
        raise ConfigError("aep-classical needs an unrotated markov psi", "model", cfg.line_of("psi", "model"))
    if psi is not None and needs_phi and psi.site_dim != phi.site_dim:
        raise ConfigError("psi and phi site dimensions differ", "model", cfg.line_of("phi", "model"))
    # dimension cap before any allocation
    d = phi.site_dim if needs_phi else int(cfg.psi.get("site_dim", 2))
    sites = {
        "entropy-rates": cfg.get("n_max"),
        "pinch-audit": cfg.get("n"),
        "np-curve": cfg.get("n"),
        "stein-scan": cfg.get("n_max"),
        "qaep-build": cfg.get("n"),
        "ergodic-audit": (cfg.get("l") or 1) * (cfg.get("n_max") or 1),
    }.get(cfg.name)
    classical = psi is not None and psi.is_classical and needs_phi and phi.is_classical
    if sites is not None and not (classical and cfg.name in ("stein-scan", "qaep-build", "ergodic-audit", "entropy-rates")):
        try:
            check_dim(d ** sites, DIM_CAP)
        except DimensionCapError as exc:
            key = "n" if "n" in cfg.params else "n_max"
            raise ConfigError(str(exc), key, cfg.line_of("experiment", key)) from None
    if classical and sites is not None and d ** sites > 1 << 24:
        key = "n" if "n" in cfg.params else "n_max"
        raise ConfigError(f"{d ** sites} outcomes exceed the enumeration limit {1 << 24}", key,
                          cfg.line_of("experiment", key))


# -- experiments -------------------------------------------------------------------


@dataclass
class Outcome:
    checks: list[tuple[str, bool, str]]
    rows: list[list] | None = None
    header: list[str] | None = None
    writer: object = None

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)


def _f(x) -> str:
    return repr(float(x))


def run_entropy_rates(cfg, psi, phi) -> Outcome:
    n_max = cfg.params["n_max"]
    rep = rate_report(psi, phi)
    rows = []
    prev = -math.inf
    mono = True
    for n in range(1, n_max + 1):
        h, r = finite_rates(psi, phi, n)
        if r < prev - 1e-9:
            mono = False
        prev = r
        rows.append([n, _f(h), _f(r), _f(rep.mean_entropy), _f(rep.mean_relative_entropy)])
    if not (psi.is_classical and phi.is_classical):
        seq = mean_relative_entropy_sequence(psi, phi, n_max)
        mono = mono and seq.monotone
    below = prev <= rep.mean_relative_entropy + 1e-9
    checks = [
        ("mean_rel_entropy_nondecreasing", mono, ""),
        ("finite_n_below_rate", bool(below), f"S_n/n={prev:.6g} s={rep.mean_relative_entropy:.6g}"),
    ]
    return Outcome(checks, rows, ["n", "entropy_per_site", "rel_entropy_per_site", "s_psi", "s_rel"])


def run_pinch_audit(cfg, psi, phi) -> Outcome:
    n, trials = cfg.params["n"], cfg.params["trials"]
    seed = cfg.get("seed", 0)
    d = phi.site_dim
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed])))
    rows, res_ok, gap_ok, chain_ok = [], True, True, True
    for t in range(trials):
        rho = random_density(d ** n, rng)
        a = hiai_petz_audit(rho, phi.rho, n)
        res_ok &= a.residual <= 1e-8
        gap_ok &= -1e-9 <= a.pinch_gap <= a.bound + 1e-9
        chain_ok &= a.chain_ok()
        rows.append([t, n, _f(a.lhs), _f(a.rhs), _f(a.residual), _f(a.pinch_gap), _f(a.bound), int(a.chain_ok())])
    checks = [("residual_le_1e-8", bool(res_ok), ""), ("pinch_gap_bound", bool(gap_ok), ""),
              ("monotonicity_chain", bool(chain_ok), "")]
    return Outcome(checks, rows, ["trial", "n", "lhs", "rhs", "residual", "pinch_gap", "bound", "chain_ok"])


def run_np_curve(cfg, psi, phi) -> Outcome:
    n = cfg.params["n"]
    lams = np.geomspace(cfg.params["lambda_min"], cfg.params["lambda_max"], cfg.params["lambda_count"])
    pts = np_spectral_curve(psi.block_density(n), phi.block_density(n), lams)
    ok = all(0 <= p.type1 <= 1 and 0 <= p.type2 <= 1 for p in pts)
    rows = [[_f(p.lam), _f(p.type1), _f(p.type2), p.rank] for p in pts]
    return Outcome([("error_probabilities_in_unit_interval", ok, "")], rows, ["lambda", "type1", "type2", "rank"])


def run_stein_scan(cfg, psi, phi) -> Outcome:
    rows = stein_scan(psi, phi, cfg.params["epsilon"], cfg.params["n_max"], n_min=cfg.get("n_min", 1),
                      lambda_grid_size=cfg.get("lambda_grid_size", 200))
    conv = all(r.converse_ok for r in rows)
    order = all(r.beta_lo_per_n <= r.beta_hi_per_n + 1e-12 for r in rows)
    last = rows[-1]
    checks = [
        ("weak_converse", conv, ""),
        ("bracket_ordered", order, ""),
        ("final_gap", True, f"n={last.n} gap={last.gap:.6g}"),
    ]
    out = Outcome(checks)
    out.writer = lambda path: write_stein_csv(rows, path)
    return out


def run_aep_classical(cfg, psi, phi) -> Outcome:
    seed = cfg.get("seed", 0)
    q = np.diag(phi.rho.matrix).real
    s = classical_llr_trajectories(psi.transition, q, cfg.params["n"], cfg.params["trials"], seed)
    z = abs(s.mean - s.target) / s.std_error if s.std_error > 0 else 0.0
    checks = [
        ("finite_llr_values", s.infinite == 0 or bool(np.any(q <= 0)), f"infinite={s.infinite}"),
        ("sample_mean_z", True, f"mean={s.mean:.6g} target={s.target:.6g} z={z:.3g}"),
    ]
    out = Outcome(checks)
    out.writer = lambda path: write_llr_csv(s, path)
    return out


def run_qaep_build(cfg, psi, phi) -> Outcome:
    rep = build_separating_projector(psi, phi, cfg.params["n"], cfg.params["epsilon"])
    sums = abs(rep.psi_mass - rep.atoms.psi_weights[rep.selected].sum()) <= 1e-10
    checks = [
        ("window_bounds", rep.window_bounds_ok(), f"selected={len(rep.selected)}"),
        ("mass_consistency", bool(sums), f"psi_mass={rep.psi_mass:.6g} phi_mass={rep.phi_mass:.6g}"),
    ]
    if rep.vectors is None or cfg.params["n"] <= 8:
        tr = float(np.trace(phi.block_density(cfg.params["n"]).matrix @ rep.projector()).real) \
            if phi.site_dim ** cfg.params["n"] <= 4096 else rep.phi_mass
        checks.append(("phi_mass_trace", abs(tr - rep.phi_mass) <= 1e-10, ""))
    out = Outcome(checks)
    out.writer = lambda path: write_separating_csv(rep, path)
    return out


def run_ergodic_audit(cfg, psi, phi) -> Outcome:
    dec = gl_decompose(psi, cfg.params["l"])
    audit = component_audit(dec, phi, cfg.params["n_max"])
    checks = [
        ("k_divides_l", cfg.params["l"] % dec.k_l == 0, f"k_l={dec.k_l}"),
        ("mixture_identity", audit.mixture_error <= 1e-10, ""),
        ("translates", audit.translate_error <= 1e-10, ""),
        ("component_rates_equal", audit.ok(), ""),
    ]
    out = Outcome(checks)
    out.writer = lambda path: write_audit_csv(audit, path)
    return out


RUNNERS = {
    "entropy-rates": run_entropy_rates,
    "pinch-audit": run_pinch_audit,
    "np-curve": run_np_curve,
    "stein-scan": run_stein_scan,
    "aep-classical": run_aep_classical,
    "qaep-build": run_qaep_build,
    "ergodic-audit": run_ergodic_audit,
}


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def run(cfg: ExperimentConfig, out_dir) -> int:
    out_dir = Path(out_dir)
    psi = build_model(cfg, "psi")
    phi = build_model(cfg, "phi")
    outcome = RUNNERS[cfg.name](cfg, psi, phi)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = out_dir / RESULT_FILE[cfg.name]
    if outcome.writer is not None:
        outcome.writer(result)
    else:
        _write_rows(result, outcome.header, outcome.rows)
    _write_rows(out_dir / "summary.csv", ["check", "passed", "detail"],
                [[name, int(ok), detail] for name, ok, detail in outcome.checks])
    status = "pass" if outcome.passed else "fail"
    failed = [name for name, ok, _ in outcome.checks if not ok]
    print(f"{cfg.name}: {status}" + (f" (failed: {', '.join(failed)})" if failed else "") + f" -> {result}")
    return 0 if outcome.passed else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qstein", description="Run a hypothesis-testing experiment from a config file.")
    p.add_argument("--config", required=True, help="INI experiment configuration")
    p.add_argument("--out", default=None, help="output directory (overrides the config's out key)")
    p.add_argument("--seed", type=int, default=None, help="override the experiment seed")
    p.add_argument("--check-only", action="store_true", help="validate the config and exit")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(text)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("seed must be nonnegative", "--seed")
            cfg.params["seed"] = args.seed
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.check_only:
        print(f"{cfg.name}: config ok")
        return 0
    out_dir = args.out or cfg.get("out") or "out"
    try:
        return run(cfg, out_dir)
    except (ValueError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
