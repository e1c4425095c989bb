"""Scenario runner: reproduce the headline analyses from declarative files.

Scenario files are plain ``key = value`` text (# comments allowed).  Core
keys follow the physical-parameter schema: J, gamma, M, eta, gamma_b,
sigma_bF, sigma_z0, sigma_b0, J_prime, lambda, dt, T, seed, trials.
Command-specific keys: mode, regime, f_sweep, t_eval, omega_min,
omega_max, n_omega, J_min, J_max, omega_Q, omega_1, omega_L, decimate.
Unknown keys are rejected.

Verbs
-----
simulate    one open-loop truth trajectory               -> CSV t,z,b,u,ydt
riccati     covariance solutions, three routes           -> CSV per-time rows
montecarlo  closed-loop ensemble vs the Riccati curve    -> CSV summary
mismatch    spin-number mismatch factor sweep            -> CSV + stdout table
bode        saturated-loop transfer functions            -> CSV + report
design      robust controller synthesis and J sweep      -> CSV + report
qsme-verify quantum-oracle suite battery                 -> CSV + report

Every command is deterministic given (scenario, seed); floats are written
with 17 significant digits so repeated runs are byte-identical.  Exit
codes: 0 success, 2 configuration error, 3 numerical error, 4 a
verification suite or design criterion failed.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from multiprocessing import Pool

import numpy as np

from . import freq, qsme, riccati, total_covariance as tc
from .errors import ConfigurationError, NumericalError, SpintrackError
from .lqg_filter import (design_plant, design_prior, run_closed_loop, run_ensemble,
                         summarize_ensemble)
from .model import DesignParams, PlantParams, Priors
from .numerics import RngStream
from .truth_sim import simulate_open_loop

_FLOAT_KEYS = {
    "J", "gamma", "M", "eta", "gamma_b", "sigma_bF", "sigma_z0", "sigma_b0",
    "J_prime", "lambda", "dt", "T", "t_eval", "omega_min", "omega_max",
    "J_min", "J_max", "omega_Q", "omega_1", "omega_L",
}
_INT_KEYS = {"seed", "trials", "n_omega", "decimate"}
_LIST_KEYS = {"f_sweep"}
_STR_KEYS = {"mode", "regime"}
_ALL_KEYS = _FLOAT_KEYS | _INT_KEYS | _LIST_KEYS | _STR_KEYS

_MC_CHUNK = 256  # fixed worker chunk so results do not depend on worker count


def parse_scenario(path: str) -> dict:
    """Load and validate a key = value scenario file."""
    values: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
            key, _, val = line.partition("=")
            key = key.strip()
            val = val.strip()
            if key not in _ALL_KEYS:
                raise ConfigurationError(f"{path}:{lineno}: unknown scenario key '{key}'")
            if key in values:
                raise ConfigurationError(f"{path}:{lineno}: duplicate key '{key}'")
            if key in _FLOAT_KEYS:
                values[key] = float(val)
            elif key in _INT_KEYS:
                values[key] = int(val)
            elif key in _LIST_KEYS:
                values[key] = [float(x) for x in val.split(",") if x.strip()]
            else:
                values[key] = val
    return values


def build_plant(sc: dict) -> PlantParams:
    try:
        return PlantParams(J=sc["J"], gamma=sc["gamma"], M=sc["M"],
                           eta=sc.get("eta", 1.0), gamma_b=sc.get("gamma_b", 0.0),
                           sigma_bF=sc.get("sigma_bF", 0.0))
    except KeyError as exc:
        raise ConfigurationError(f"scenario missing required key {exc}") from exc


def build_priors(sc: dict, p: PlantParams) -> Priors:
    return Priors(sigma_z0=sc.get("sigma_z0", p.J / 2.0), sigma_b0=sc.get("sigma_b0", 0.0))


def build_design(sc: dict, p: PlantParams) -> DesignParams:
    return DesignParams(J_prime=sc.get("J_prime", p.J), lam=sc.get("lambda", 0.0))


def _fmt(x) -> str:
    if isinstance(x, float) or isinstance(x, np.floating):
        return "%.17g" % x
    return str(x)


def write_csv(path: str, header: list[str], columns: list[np.ndarray]):
    rows = len(columns[0])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(rows):
            fh.write(",".join(_fmt(col[i]) for col in columns) + "\n")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(sc: dict, seed: int, out: str, workers: int) -> int:
    p = build_plant(sc)
    prior = build_priors(sc, p)
    if "mode" in sc:
        # closed-loop trial: truth plus the filter history
        d = build_design(sc, p)
        res = run_closed_loop(p, prior, d, sc["mode"], RngStream(seed), sc["dt"], sc["T"])
        traj = res.trajectory
        write_csv(out, ["t", "z", "b", "u", "z_tilde", "b_tilde"],
                  [traj.t, traj.z, traj.b, traj.u, res.z_tilde, res.b_tilde])
        print(f"simulate ({sc['mode']}): {traj.n_steps} steps written to {out}")
        return 0
    traj = simulate_open_loop(p, prior, RngStream(seed), sc["dt"], sc["T"])
    write_csv(out, ["t", "z", "b", "u", "ydt"], [traj.t, traj.z, traj.b, traj.u, traj.ydt])
    print(f"simulate: {traj.n_steps} steps written to {out}")
    return 0


def cmd_riccati(sc: dict, seed: int, out: str, workers: int) -> int:
    p = build_plant(sc)
    prior = build_priors(sc, p)
    t_lo, t_hi = sc["dt"], sc["T"]
    times = np.geomspace(t_lo, t_hi, 241)
    cov = riccati.riccati_at_times(p, prior, times)
    constant = p.sigma_bF == 0.0 and p.gamma_b == 0.0
    if constant:
        sb_an = np.array([riccati.analytic_sigma_b(p, prior, t) for t in times])
        sz_an = np.array([riccati.analytic_sigma_z(p, prior, t) for t in times])
    else:
        sb_an = np.full_like(times, np.nan)
        sz_an = np.full_like(times, np.nan)
    lin = riccati.linearized_riccati_curve(p, prior, times)
    sz_lin, sb_lin = lin.sigma_zR, lin.sigma_bR
    with np.errstate(divide="ignore", invalid="ignore"):
        dev_an = np.abs(sb_an / cov.sigma_bR - 1.0)
        dev_lin = np.abs(sb_lin / cov.sigma_bR - 1.0)
    write_csv(out, ["t", "sigma_zR", "sigma_cR", "sigma_bR",
                    "sigma_zR_analytic", "sigma_bR_analytic",
                    "sigma_zR_linearized", "sigma_bR_linearized",
                    "bdev_analytic", "bdev_linearized"],
              [times, cov.sigma_zR, cov.sigma_cR, cov.sigma_bR,
               sz_an, sb_an, sz_lin, sb_lin, dev_an, dev_lin])
    worst = np.nanmax(np.concatenate([dev_an, dev_lin]))
    print(f"riccati: {len(times)} rows to {out}; worst cross-route deviation {worst:.3e}")
    return 0


def _mc_chunk(args):
    p, prior, d, mode, seed, offset, count, dt, T, decimate = args
    return run_ensemble(p, prior, d, mode, seed, count, dt, T,
                        decimate=decimate, trial_offset=offset)


def cmd_montecarlo(sc: dict, seed: int, out: str, workers: int) -> int:
    p = build_plant(sc)
    prior = build_priors(sc, p)
    d = build_design(sc, p)
    mode = sc.get("mode", "dynamic_gain")
    trials = sc.get("trials", 2000)
    dt, T = sc["dt"], sc["T"]
    n = int(round(T / dt))
    decimate = sc.get("decimate", max(1, n // 200))
    chunks = [(p, prior, d, mode, seed, off, min(_MC_CHUNK, trials - off), dt, T, decimate)
              for off in range(0, trials, _MC_CHUNK)]
    if workers > 1:
        with Pool(processes=workers) as pool:
            parts = pool.map(_mc_chunk, chunks)
    else:
        parts = [_mc_chunk(c) for c in chunks]
    t_out = parts[0][0]
    sums = np.zeros_like(parts[0][1])
    for _, s in parts:
        sums += s
    summary = summarize_ensemble(sums, trials)
    cov = riccati.riccati_at_times(design_plant(p, d), design_prior(d, prior), t_out)
    write_csv(out, ["t", "sigma_bE", "se_bE", "sigma_zE", "se_zE", "sigma_bR", "sigma_zR"],
              [t_out, summary["sigma_bE"], summary["se_bE"],
               summary["sigma_zE"], summary["se_zE"], cov.sigma_bR, cov.sigma_zR])
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.abs(summary["sigma_bE"] / cov.sigma_bR - 1.0)
    print(f"montecarlo: {trials} trials ({mode}), {len(t_out)} rows to {out}; "
          f"max |sigma_bE/sigma_bR - 1| = {np.nanmax(rel):.4f}")
    return 0


def cmd_mismatch(sc: dict, seed: int, out: str, workers: int) -> int:
    regime = sc.get("regime")
    if regime not in ("fluctuating_steady", "constant_transient"):
        raise ConfigurationError("mismatch: scenario must set regime = fluctuating_steady "
                                 "or constant_transient")
    f_values = sc.get("f_sweep")
    if not f_values:
        raise ConfigurationError("mismatch: scenario must set f_sweep")
    p0 = build_plant(sc)
    d = build_design(sc, p0)
    sigma_b0 = sc.get("sigma_b0", 0.0)
    rows_f, rows_t, rows_sbe, rows_factor, rows_pred, rows_valid = [], [], [], [], [], []
    table = []
    for f in f_values:
        p = replace(p0, J=f * d.J_prime)
        prior = Priors(sigma_z0=p.J / 2.0, sigma_b0=sigma_b0)
        if regime == "fluctuating_steady":
            err = tc.steady_state_error(p, d)
            if d.lam > 0:
                ref = riccati.steady_state_gains(design_plant(p, d), d).sigma_bS
                pred = tc.mismatch_factors(f, "controlled_steady")
            else:
                ref = p.sigma_bFree
                pred = tc.mismatch_factors(f, "uncontrolled_fluctuating")
            factor = err / ref
            rows_f.append(f)
            rows_t.append(math.inf)
            rows_sbe.append(err)
            rows_factor.append(factor)
            rows_pred.append(pred)
            rows_valid.append(1)
            table.append((f, factor, pred))
        else:
            t_eval = sc.get("t_eval", 1e-5)
            curve = tc.transient_error_curve(p, prior, d, np.array([t_eval]))
            err = float(curve.sigma_bE[0])
            ref = riccati.transient_sigma_b(p, t_eval, J=d.J_prime)
            factor = err / ref
            try:
                pred = tc.mismatch_factors(f, "controlled_transient")
                valid = 1
            except ConfigurationError:
                pred = math.nan
                valid = 0
            rows_f.append(f)
            rows_t.append(t_eval)
            rows_sbe.append(err)
            rows_factor.append(factor)
            rows_pred.append(pred)
            rows_valid.append(valid)
            table.append((f, factor, pred))
    write_csv(out, ["f", "t", "sigma_bE", "factor", "factor_predicted", "valid"],
              [np.array(rows_f), np.array(rows_t), np.array(rows_sbe),
               np.array(rows_factor), np.array(rows_pred), np.array(rows_valid)])
    print(f"mismatch ({regime}): factor at reference point vs prediction")
    for f, factor, pred in table:
        if math.isnan(pred):
            print(f"  f = {f:8.3g}: measured {factor:.4f}, prediction out of validity")
        else:
            print(f"  f = {f:8.3g}: measured {factor:.4f}  predicted {pred:.4f}  "
                  f"rel dev {abs(factor / pred - 1):.3f}")
    return 0


def cmd_bode(sc: dict, seed: int, out: str, workers: int) -> int:
    p = build_plant(sc)
    d = build_design(sc, p)
    gz, gb, gu = freq.closed_loop_tfs(p, d)
    omega = np.geomspace(sc.get("omega_min", 1e4), sc.get("omega_max", 1e12),
                         sc.get("n_omega", 481))
    cols = [omega]
    header = ["omega"]
    for name, tf in (("Gz", gz), ("Gb", gb), ("Gu", gu)):
        mag, phase = freq.bode(tf, omega)
        cols += [mag, phase]
        header += [f"{name}_mag_dB", f"{name}_phase_deg"]
    write_csv(out, header, cols)
    r = math.sqrt(p.sigma_bF / p.sigma_M)
    gj = p.gamma * d.J_prime
    omega_h = math.sqrt(0.5 * gj * r)
    wc = freq.closure_frequency(gu, p.gamma * p.J, hint=omega_h)
    print(f"bode: {len(omega)} rows to {out}")
    print(f"omega_H (formula): {_fmt(omega_h)}")
    print(f"omega_C (bisection): {_fmt(wc)}")
    print(f"omega_C / omega_H: {_fmt(wc / omega_h)}")
    margins = freq.approximation_margins(p, d)
    print(f"lambda_margin: {_fmt(margins['lambda_margin'])}")
    print(f"gammaJ_margin: {_fmt(margins['gammaJ_margin'])}")
    try:
        cf = freq.char_freqs(p, d, check_closure=False)
        for k in ("omega_L", "omega_H", "omega_C", "omega_Q", "G_uDC", "G_uAC"):
            print(f"{k}: {_fmt(getattr(cf, k))}")
    except ConfigurationError as exc:
        print(f"char_freqs: out of regime ({exc})")
    return 0


def cmd_design(sc: dict, seed: int, out: str, workers: int) -> int:
    for key in ("J_min", "J_max", "omega_Q", "omega_1", "gamma"):
        if key not in sc:
            raise ConfigurationError(f"design: scenario must set {key}")
    c, w10 = freq.design_robust_controller(sc["J_min"], sc["J_max"], sc["omega_Q"],
                                           sc["omega_1"], sc["gamma"],
                                           omega_L=sc.get("omega_L"))
    w1 = freq.performance_weight(w10, sc["omega_1"])
    omega_h = sc["omega_1"] * w10
    omega_l = sc.get("omega_L", omega_h / 100.0)
    grid = np.geomspace(omega_l / 10.0, 10.0 * sc["omega_Q"],
                        max(400, sc.get("n_omega", 600)))
    j_grid = np.geomspace(sc["J_min"], sc["J_max"], 25)
    norms = np.empty(25)
    stable = np.empty(25)
    for i, J in enumerate(j_grid):
        try:
            norms[i] = freq.sensitivity_norm(c, J, sc["gamma"], w1, grid)
            stable[i] = 1
        except NumericalError:
            norms[i] = math.inf
            stable[i] = 0
    write_csv(out, ["J", "W1S_inf", "stable"], [j_grid, norms, stable])
    ok = bool(np.all(stable == 1) and np.all(norms < 1.0))
    print(f"design: report for J in [{_fmt(sc['J_min'])}, {_fmt(sc['J_max'])}]")
    print(f"W10: {_fmt(w10)}")
    print(f"tradeoff_W10_omega1: {_fmt(w10 * sc['omega_1'])}")
    print(f"tradeoff_rhs: {_fmt(sc['omega_Q'] * sc['J_min'] / sc['J_max'])}")
    print(f"omega_L: {_fmt(omega_l)}")
    print(f"omega_H: {_fmt(omega_h)}")
    print(f"omega_Q: {_fmt(sc['omega_Q'])}")
    print(f"max_W1S: {_fmt(float(np.max(norms)))}")
    print(f"all_stable: {int(np.all(stable == 1))}")
    print(f"criterion_met: {int(ok)}")
    return 0 if ok else 4


def cmd_qsme_verify(sc: dict, seed: int, out: str, workers: int) -> int:
    suites = qsme.run_all_suites(seed=seed)
    decay = next(s for s in suites if s["name"] == "jx_decay")
    track = next(s for s in suites if s["name"] == "variance_tracking")
    grid = next(s for s in suites if s["name"] == "grid_vs_kalman")
    cols_suite, cols_t, cols_val, cols_pred = [], [], [], []
    for s, key in ((decay, "jx"), (track, "dJz2")):
        stride = max(1, len(s["t"]) // 200)
        for i in range(0, len(s["t"]), stride):
            cols_suite.append(s["name"])
            cols_t.append(s["t"][i])
            cols_val.append(s[key][i])
            cols_pred.append(s["predicted"][i])
    # final posterior snapshot: rows are (hypothesis b, weight)
    b_vals, weights = grid["posterior"]
    for bv, w in zip(b_vals, weights):
        cols_suite.append("grid_posterior")
        cols_t.append(bv)
        cols_val.append(w)
        cols_pred.append(math.nan)
    write_csv(out, ["suite", "t", "value", "predicted"],
              [np.array(cols_suite), np.array(cols_t), np.array(cols_val), np.array(cols_pred)])
    all_ok = True
    for s in suites:
        status = "pass" if s["passed"] else "FAIL"
        detail = {k: v for k, v in s.items()
                  if isinstance(v, (int, float, bool)) and k not in ("passed",)}
        print(f"{s['name']}: {status} " +
              " ".join(f"{k}={_fmt(v)}" for k, v in detail.items()))
        all_ok = all_ok and s["passed"]
    return 0 if all_ok else 4


_COMMANDS = {
    "simulate": cmd_simulate,
    "riccati": cmd_riccati,
    "montecarlo": cmd_montecarlo,
    "mismatch": cmd_mismatch,
    "bode": cmd_bode,
    "design": cmd_design,
    "qsme-verify": cmd_qsme_verify,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="spintrack",
                                     description="continuous-measurement magnetometry toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--scenario", required=True, help="scenario file path")
        sp.add_argument("--seed", type=int, default=None, help="override scenario seed")
        sp.add_argument("--out", required=True, help="output CSV path")
        sp.add_argument("--workers", type=int, default=1, help="worker processes")
    args = parser.parse_args(argv)
    try:
        sc = parse_scenario(args.scenario)
        seed = args.seed if args.seed is not None else sc.get("seed", 0)
        return _COMMANDS[args.command](sc, seed, args.out, max(1, args.workers))
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except SpintrackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
