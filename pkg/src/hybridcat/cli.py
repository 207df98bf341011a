"""Experiment runner: reproduces every figure curve and headline number as
CSV/JSON data files, plus a verify mode that pits the closed forms against
the engines.

Output is data only (no plotting).  CSV files are deterministic: fixed
column order, '\n' line endings, floats printed as the shortest round-trip
representation capped at 12 significant digits.

Exit codes: 0 success, 2 configuration error, 3 verify-mode tolerance
breach, 1 runtime failure.  Failures print a machine-readable JSON error
record to stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import analytic
from .analytic import OperatingPoint
from .elements import FIBER_DB_PER_KM
from .metrics import PhaseSpaceGrid, fidelity, npt, project_dv, target_hybrid, wigner, wigner_negativity
from .scheme import NetworkConfig, run
from .sources import CVSourceSpec, DVSourceSpec

__all__ = ["main", "run_experiment", "emit_wigner_field", "ConfigError", "VerifyFailure"]

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_VERIFY = 3

DEFAULT_ETAS = (0.6, 0.8, 0.9, 0.95, 1.0)


class ConfigError(ValueError):
    pass


class VerifyFailure(RuntimeError):
    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


def fmt(x) -> str:
    """Shortest round-trip float representation, capped at 12 significant digits."""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    v = float(x)
    if math.isnan(v) or math.isinf(v):
        return repr(v)
    s = repr(v)
    digits = sum(c.isdigit() for c in s.split("e")[0])
    if digits > 12:
        s = f"{v:.12g}"
    return s


def _write_csv(path: str, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    text = "\n".join(lines) + "\n"
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _write_json(path: str, payload):
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _sweep_values(spec: str, default_param: str):
    """Parse 'param:start:stop:count:lin|log' into (param, ndarray)."""
    parts = spec.split(":")
    if len(parts) != 5:
        raise ConfigError(f"sweep spec needs param:start:stop:count:lin|log, got {spec!r}")
    param, start, stop, count, scale = parts
    try:
        start, stop, count = float(start), float(stop), int(count)
    except ValueError as exc:
        raise ConfigError(f"bad sweep numbers in {spec!r}: {exc}") from None
    if count < 2:
        raise ConfigError("sweep count must be >= 2")
    if scale == "lin":
        values = np.linspace(start, stop, count)
    elif scale == "log":
        if start <= 0 or stop <= 0:
            raise ConfigError("log sweeps require positive endpoints")
        values = np.geomspace(start, stop, count)
    else:
        raise ConfigError(f"sweep scale must be lin or log, got {scale!r}")
    return (param or default_param), values


def _engine_point(alpha, r_alpha, eta, herald, engine="branch"):
    """(fidelity, probability) of one configuration from the network."""
    cfg = NetworkConfig(alpha=alpha, r=r_alpha / alpha, eta=eta, herald=herald, engine=engine)
    out = run(cfg)
    st = out.state
    target = target_hybrid(cfg.alpha_f, st.dims[0], st.dims[2])
    return fidelity(st, target), out.probability


def _resolve_r_alpha(ns, alpha, default):
    if ns.r_alpha is not None:
        return ns.r_alpha
    if ns.r is not None:
        return ns.r * alpha
    return default


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def _fig2(ns):
    if ns.lc_km is None:
        raise ConfigError("fig2 needs --lc-km (the paper cites it from an external experiment)")
    param, zs = _sweep_values(ns.sweep or "z_km:0:500:101:lin", "z_km")
    if param != "z_km":
        raise ConfigError("fig2 sweeps z_km")
    alpha_f = ns.alpha if ns.alpha is not None else 2.0
    header = ["z_km", "fidelity_timebin", "fidelity_singlerail", "fidelity_polarization"]
    rows = []
    for z in zs:
        rows.append(
            [
                z,
                analytic.remote_fidelity("timebin", z, alpha_f),
                analytic.remote_fidelity("singlerail", z, alpha_f, beta_db_per_km=ns.beta_db_per_km),
                analytic.remote_fidelity("polarization", z, alpha_f, lc_km=ns.lc_km),
            ]
        )
    return header, rows


def _fig3(ns):
    param, ras = _sweep_values(ns.sweep or "r_alpha:0.01:1.5:100:lin", "r_alpha")
    if param != "r_alpha":
        raise ConfigError("fig3 sweeps r_alpha")
    alpha = ns.alpha if ns.alpha is not None else 2.0
    etas = [ns.eta] if ns.eta is not None else list(DEFAULT_ETAS)
    header = [
        "protocol",
        "r_alpha",
        "eta",
        "fidelity_analytic",
        "fidelity_engine",
        "prob_analytic",
        "prob_engine",
    ]
    rows = []
    for ra in ras:
        pt = OperatingPoint(alpha, ra / alpha, 1.0)
        f_eng, p_eng = _engine_point(alpha, ra, 1.0, "ideal")
        rows.append(["ideal", ra, 1.0, 1.0, f_eng, analytic.p_ideal(pt), p_eng])
        for eta in etas:
            pt = OperatingPoint(alpha, ra / alpha, eta)
            f_eng, p_eng = _engine_point(alpha, ra, eta, "simple")
            rows.append(
                ["simple", ra, eta, analytic.fidelity1(pt), f_eng, analytic.p1(pt), p_eng]
            )
    return header, rows


def _fig4(ns):
    param, ras = _sweep_values(ns.sweep or "r_alpha:0.02:1.0:50:lin", "r_alpha")
    if param != "r_alpha":
        raise ConfigError("fig4 sweeps r_alpha")
    alpha = ns.alpha if ns.alpha is not None else 2.0
    eta = ns.eta if ns.eta is not None else 0.95
    proj = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex) / math.sqrt(2.0)
    header = ["r_alpha", "eta", "wigner_negativity", "npt", "wigner_negativity_ideal", "npt_ideal"]
    rows = []
    ideal_neg = ideal_npt = None
    for ra in ras:
        cfg = NetworkConfig(alpha=alpha, r=ra / alpha, eta=eta, herald="simple", engine="branch")
        out = run(cfg)
        rho_cv, _ = project_dv(out.state, proj)
        neg = wigner_negativity(rho_cv, alpha_hint=cfg.alpha_f)
        value_npt = npt(out.state)
        if ideal_neg is None:
            id_out = run(NetworkConfig(alpha=alpha, r=ra / alpha, eta=eta, herald="ideal", engine="branch"))
            id_cv, _ = project_dv(id_out.state, proj)
            ideal_neg = wigner_negativity(id_cv, alpha_hint=cfg.alpha_f)
            ideal_npt = npt(id_out.state)
        rows.append([ra, eta, neg, value_npt, ideal_neg, ideal_npt])
    return header, rows


def _fig5(ns):
    param, lams = _sweep_values(ns.sweep or "lambda2:1e-05:0.1:61:log", "lambda2")
    if param != "lambda2":
        raise ConfigError("fig5 sweeps lambda2")
    alpha = ns.alpha if ns.alpha is not None else 0.25
    eta = ns.eta if ns.eta is not None else 0.95
    r_alpha = _resolve_r_alpha(ns, alpha, 0.075 * math.sqrt(2.0))
    r = r_alpha / alpha
    if ns.zeta is not None:
        zeta = ns.zeta
        p0 = analytic.p0_squeezed(zeta, r, alpha, eta)
    else:
        zeta, p0 = analytic.optimal_zeta(r, alpha, eta)
    header = ["lambda2", "fidelity_cat_cv", "fidelity_squeezed_cv", "herald_prob_squeezed"]
    rows = []
    for lam2 in lams:
        pt = OperatingPoint(alpha, r, eta, zeta=zeta, lam2=float(lam2))
        rows.append(
            [
                lam2,
                analytic.fidelity_multipair(pt),
                analytic.fidelity_squeezed(pt, p0),
                analytic.herald_prob_squeezed(pt, p0),
            ]
        )
    return header, rows


def _point(ns):
    alpha = ns.alpha if ns.alpha is not None else 2.0
    eta = ns.eta if ns.eta is not None else 0.95
    r_alpha = _resolve_r_alpha(ns, alpha, 0.075 * math.sqrt(2.0))
    r = r_alpha / alpha
    pt = OperatingPoint(alpha, r, eta)
    record = {
        "alpha": alpha,
        "r": r,
        "r_alpha": r_alpha,
        "eta": eta,
        "alpha_f": pt.alpha_f,
        "analytic": {
            "p_ideal": analytic.p_ideal(pt),
            "p1": analytic.p1(pt),
            "fidelity1": analytic.fidelity1(pt),
            "p2": analytic.p2(pt),
        },
    }
    f_eng, p_eng = _engine_point(alpha, r_alpha, eta, ns.herald or "simple", engine="branch")
    record["engine"] = {"herald": ns.herald or "simple", "fidelity": f_eng, "herald_prob": p_eng}
    if ns.zeta is not None:
        zeta = ns.zeta
        p0 = analytic.p0_squeezed(zeta, r, alpha, eta)
        lam2_opt, f_opt = analytic.optimal_lambda2(
            OperatingPoint(alpha, r, eta, zeta=zeta), p0
        )
        sq = {
            "zeta": zeta,
            "p0": p0,
            "lambda2_opt": lam2_opt,
            "fidelity": f_opt,
            "herald_prob": analytic.herald_prob_squeezed(
                OperatingPoint(alpha, r, eta, zeta=zeta, lam2=lam2_opt), p0
            ),
            "p1_window": analytic.p1_window(pt),
        }
        if ns.lambda2 is not None:
            at = OperatingPoint(alpha, r, eta, zeta=zeta, lam2=ns.lambda2)
            sq["fidelity_at_lambda2"] = analytic.fidelity_squeezed(at, p0)
            sq["herald_prob_at_lambda2"] = analytic.herald_prob_squeezed(at, p0)
        cfgd = NetworkConfig(
            alpha=alpha,
            r=r,
            eta=eta,
            cv=CVSourceSpec("squeezed_vacuum", alpha=alpha, zeta=zeta),
            dv=DVSourceSpec("spdc", lam2=ns.lambda2 if ns.lambda2 is not None else lam2_opt),
            herald="simple",
            engine="dense",
        )
        sq["p0_engine"] = run(cfgd, dv_component="vacuum", want_state=False).probability
        record["squeezed"] = sq
    return record


def _verify(ns):
    """Analytic formulas vs engine pipeline across a parameter grid."""
    checks = []

    def add(name, deviation, tol):
        checks.append((name, float(deviation), float(tol), deviation <= tol))

    alphas = (0.5, 1.0, 2.0)
    fractions = (0.1, 0.45, 0.8)
    etas = (0.6, 0.95)
    worst_pid = worst_fid = worst_p1 = worst_f1 = 0.0
    for alpha in alphas:
        for frac in fractions:
            ra = frac * alpha
            pt0 = OperatingPoint(alpha, ra / alpha, 1.0)
            f_eng, p_eng = _engine_point(alpha, ra, 1.0, "ideal")
            worst_pid = max(worst_pid, abs(p_eng - analytic.p_ideal(pt0)) / analytic.p_ideal(pt0))
            worst_fid = max(worst_fid, abs(f_eng - 1.0))
            for eta in etas:
                pt = OperatingPoint(alpha, ra / alpha, eta)
                f_eng, p_eng = _engine_point(alpha, ra, eta, "simple")
                worst_p1 = max(worst_p1, abs(p_eng - analytic.p1(pt)) / analytic.p1(pt))
                worst_f1 = max(worst_f1, abs(f_eng - analytic.fidelity1(pt)))
    add("ideal probability vs closed form (rel)", worst_pid, 1e-8)
    add("ideal fidelity = 1 (abs)", worst_fid, 1e-8)
    add("on-off probability vs closed form (rel)", worst_p1, 1e-8)
    add("on-off fidelity vs closed form (abs)", worst_f1, 1e-8)

    worst_p2 = 0.0
    for alpha, ra, eta in ((0.25, 0.106, 0.95), (0.5, 0.3, 0.8)):
        cfg = NetworkConfig(
            alpha=alpha, r=ra / alpha, eta=eta, dv=DVSourceSpec("spdc", lam2=1e-3),
            herald="simple", engine="branch", branch_limit=256,
        )
        p_eng = run(cfg, dv_component="epsilon", want_state=False).probability
        p_formula = analytic.p2(OperatingPoint(alpha, ra / alpha, eta))
        worst_p2 = max(worst_p2, abs(p_eng - p_formula) / p_formula)
    add("double-pair probability vs closed form (rel)", worst_p2, 1e-6)

    ra = 0.075 * math.sqrt(2.0)
    p0_series = analytic.p0_squeezed(-0.061, ra / 0.25, 0.25, 0.95)
    cfg = NetworkConfig(
        alpha=0.25, r=ra / 0.25, eta=0.95,
        cv=CVSourceSpec("squeezed_vacuum", alpha=0.25, zeta=-0.061),
        dv=DVSourceSpec("spdc", lam2=9.4e-4), herald="simple", engine="dense",
    )
    p0_engine = run(cfg, dv_component="vacuum", want_state=False).probability
    add("vacuum-DV squeezed probability: series vs dense (rel)",
        abs(p0_series - p0_engine) / p0_series, 1e-6)

    header = ["check", "max_deviation", "tolerance", "status"]
    rows = [[name, dev, tol, "pass" if ok else "FAIL"] for name, dev, tol, ok in checks]
    ok = all(c[3] for c in checks)
    return header, rows, ok


def emit_wigner_field(ns):
    """CSV rows (x, p, W) of either the vacuum or the projected conditional
    CV state at the configured point."""
    grid = _grid_from(ns)
    if ns.wigner_state == "vacuum":
        vec = np.zeros(8, dtype=complex)
        vec[0] = 1.0
        state = vec
    else:
        alpha = ns.alpha if ns.alpha is not None else 2.0
        eta = ns.eta if ns.eta is not None else 0.95
        r_alpha = ns.r_alpha if ns.r_alpha is not None else 0.075 * math.sqrt(2.0)
        cfg = NetworkConfig(
            alpha=alpha, r=r_alpha / alpha, eta=eta,
            herald=ns.herald or "ideal", engine="branch",
        )
        out = run(cfg)
        proj = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex) / math.sqrt(2.0)
        state, _ = project_dv(out.state, proj)
    w = wigner(state, grid)
    header = ["x", "p", "W"]
    rows = []
    for i, x in enumerate(grid.xs):
        for j, p in enumerate(grid.ps):
            rows.append([x, p, w[i, j]])
    return header, rows


def _grid_from(ns) -> PhaseSpaceGrid:
    alpha_hint = ns.alpha if ns.alpha is not None else 2.0
    default = PhaseSpaceGrid.default(alpha_hint)
    gx = ns.grid_x or f"{default.x_min}:{default.x_max}:{default.n_x}"
    gp = ns.grid_p or f"{default.p_min}:{default.p_max}:{default.n_p}"

    def parse(spec):
        parts = spec.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid spec needs min:max:n, got {spec!r}")
        return float(parts[0]), float(parts[1]), int(parts[2])

    x0, x1, nx = parse(gx)
    p0, p1, np_ = parse(gp)
    try:
        return PhaseSpaceGrid(x0, x1, p0, p1, nx, np_)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hybridcat",
        description="Heralded hybrid time-bin/cat entanglement: figure data, "
        "headline numbers, and analytic-vs-engine verification.",
    )
    p.add_argument("--experiment", choices=["fig2", "fig3", "fig4", "fig5", "point", "verify", "wigner"])
    p.add_argument("--alpha", type=float, help="CV input amplitude (fig2: the hybrid state's alpha_f)")
    p.add_argument("--r", type=float, help="BS1 field reflection coefficient")
    p.add_argument("--r-alpha", type=float, help="tapped amplitude r*alpha (overrides --r)")
    p.add_argument("--eta", type=float, help="on-off detector efficiency")
    p.add_argument("--zeta", type=float, help="squeezing parameter of the squeezed-vacuum CV input")
    p.add_argument("--lambda2", type=float, help="SPDC excitation parameter")
    p.add_argument("--lc-km", type=float, help="polarization correlation length (fig2; mandatory there)")
    p.add_argument("--beta-db-per-km", type=float, default=FIBER_DB_PER_KM)
    p.add_argument("--sweep", help="param:start:stop:count:lin|log")
    p.add_argument("--engine", choices=["dense", "branch", "auto"], default="auto")
    p.add_argument("--herald", choices=["ideal", "simple"])
    p.add_argument("--out", default="-", help="output path ('-' = stdout)")
    p.add_argument("--format", choices=["csv", "json"], default=None)
    p.add_argument("--config", help="JSON file with flat flag defaults (flags override)")
    p.add_argument("--grid-x", help="wigner grid min:max:n (odd n >= 101)")
    p.add_argument("--grid-p", help="wigner grid min:max:n (odd n >= 101)")
    p.add_argument("--wigner-state", choices=["conditional", "vacuum"], default="conditional")
    return p


def _merge_config(ns, parser):
    if not ns.config:
        return ns
    try:
        with open(ns.config) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a flat JSON object")
    defaults = {}
    for key, value in data.items():
        attr = key.replace("-", "_")
        if not hasattr(ns, attr):
            raise ConfigError(f"unknown config key {key!r}")
        defaults[attr] = value
    # command-line flags win: only fill attributes the user left unset
    sentinel = parser.parse_args([])
    for attr, value in defaults.items():
        if getattr(ns, attr) == getattr(sentinel, attr):
            setattr(ns, attr, value)
    return ns


def run_experiment(ns) -> int:
    """Dispatch one parsed configuration; returns the exit code."""
    if not ns.experiment:
        raise ConfigError("--experiment is required (fig2|fig3|fig4|fig5|point|verify|wigner)")
    fmt_kind = ns.format or ("json" if ns.experiment == "point" else "csv")
    if ns.experiment == "point":
        record = _point(ns)
        if fmt_kind == "json":
            _write_json(ns.out, record)
        else:
            flat = _flatten(record)
            _write_csv(ns.out, list(flat.keys()), [list(flat.values())])
        return EXIT_OK
    if ns.experiment == "verify":
        header, rows, ok = _verify(ns)
        if fmt_kind == "json":
            _write_json(ns.out, [dict(zip(header, r)) for r in rows])
        else:
            _write_csv(ns.out, header, rows)
        for name, dev, tol, good in [(r[0], r[1], r[2], r[3] == "pass") for r in rows]:
            print(f"[{'PASS' if good else 'FAIL'}] {name}: {dev:.3e} (tol {tol:.1e})", file=sys.stderr)
        if not ok:
            raise VerifyFailure("analytic-vs-engine deviation above tolerance", rows)
        return EXIT_OK
    runner = {"fig2": _fig2, "fig3": _fig3, "fig4": _fig4, "fig5": _fig5, "wigner": emit_wigner_field}[
        ns.experiment
    ]
    header, rows = runner(ns)
    if fmt_kind == "json":
        _write_json(ns.out, [dict(zip(header, [_jsonable(v) for v in row])) for row in rows])
    else:
        _write_csv(ns.out, header, rows)
    return EXIT_OK


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return float(v)
    return v


def _flatten(record, prefix=""):
    out = {}
    for key, value in record.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, name + "."))
        elif isinstance(value, (tuple, list)):
            for i, v in enumerate(value):
                out[f"{name}.{i}"] = v
        else:
            out[name] = value
    return out


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        ns = _merge_config(ns, parser)
        return run_experiment(ns)
    except ConfigError as exc:
        json.dump({"error": "config", "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return EXIT_CONFIG
    except VerifyFailure as exc:
        json.dump({"error": "verify", "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return EXIT_VERIFY
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports all failures
        json.dump({"error": "runtime", "type": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
