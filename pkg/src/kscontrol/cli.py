"""Command line driver.

    kscontrol spectrum   --kmax 50 --out DIR
    kscontrol biortho    --T 1 --kmax 6 --out DIR
    kscontrol synthesize --config run.cfg --init init.json --out DIR
    kscontrol simulate   --config run.cfg --init init.json [--control control.json] --out DIR
    kscontrol verify     --config run.cfg --init init.json --control control.json
    kscontrol estimates  --T 6.283185307179586 --out DIR
    kscontrol figures    --kmax 50 --T 6.283185307179586 --out DIR

Config files are key=value lines ('#' starts a comment); command line flags
override them.  Keys: scenario, T, kc, kmax, alpha, rho_poly, window, tol,
precision, kmax_sim, out.  Exit codes: 0 ok, 2 usage, 3 numeric failure,
4 constraint violation.  Failures print one line "error:<code>: message".
"""
import argparse
import csv
import json
import os
import sys

import numpy as np

from . import biortho, entire_functions as ef, fourier_space as fs
from . import moment_control as mc, pde_sim, spectrum

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_CONSTRAINT = 0, 2, 3, 4


class UsageError(Exception):
    pass


class CheckFailed(Exception):
    pass


# ------------------------------------------------------------- config

DEFAULTS = {"scenario": "interior_u", "T": "1.0", "kc": "", "kmax": "", "alpha": "1.0",
            "rho_poly": "1,2,-1", "window": str(mc.DEFAULT_WINDOW), "tol": "1e-6",
            "precision": "terminal", "kmax_sim": "", "out": "."}


def read_config(path):
    cfg = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{n}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in DEFAULTS:
                raise UsageError(f"{path}:{n}: unknown key {key!r}")
            cfg[key] = val
    return cfg


def resolve(args):
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        if not os.path.exists(args.config):
            raise UsageError(f"config file {args.config} not found")
        cfg.update(read_config(args.config))
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = str(val)
    try:
        out = {"scenario": cfg["scenario"], "T": float(cfg["T"]), "alpha": float(cfg["alpha"]),
               "window": float(cfg["window"]), "tol": float(cfg["tol"]),
               "precision": cfg["precision"], "out": cfg["out"],
               "kc": int(cfg["kc"]) if cfg["kc"] else None,
               "kmax": int(cfg["kmax"]) if cfg["kmax"] else None,
               "kmax_sim": int(cfg["kmax_sim"]) if cfg["kmax_sim"] else None,
               "rho_poly": tuple(int(s) for s in cfg["rho_poly"].split(","))}
    except ValueError as exc:
        raise UsageError(f"bad config value: {exc}") from None
    if out["scenario"] not in mc.SCENARIOS:
        raise UsageError(f"scenario must be one of {', '.join(mc.SCENARIOS)}")
    if out["T"] <= 0 or out["tol"] <= 0 or not (0 < out["window"] <= 1):
        raise UsageError("need T > 0, tol > 0 and 0 < window <= 1")
    if len(out["rho_poly"]) != 3:
        raise UsageError("rho-poly takes three integers a,b,c")
    return out


def _profile(cfg):
    try:
        rho, C = mc.liouville_constant(*cfg["rho_poly"])
        return mc.Profile(cfg["alpha"], rho), C
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_init(path):
    if not path:
        raise UsageError("--init is required")
    if not os.path.exists(path):
        raise UsageError(f"init file {path} not found")
    return fs.load_state(path)


# ------------------------------------------------------------- output

def _outdir(path):
    os.makedirs(path, exist_ok=True)
    return path


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_clean(obj), fh, indent=1, sort_keys=True)
        fh.write("\n")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


# ------------------------------------------------------------- commands

def cmd_spectrum(args):
    kmax = args.kmax if args.kmax is not None else 50
    if kmax < 0:
        raise UsageError("kmax must be >= 0")
    if kmax > spectrum.KMAX_GUARD:
        raise UsageError(f"kmax must be <= {spectrum.KMAX_GUARD}")
    out = _outdir(args.out or ".")
    summary = {"kmax": kmax, "zero_mode": {"k": 0, "lam": [0.0, 0.0], "multiplicity": 2}}
    if kmax == 0:
        write_json(os.path.join(out, "spectrum.json"), summary)
        return summary
    table = spectrum.spectrum_table(kmax)
    write_csv(os.path.join(out, "eigenvalues.csv"), ["k", "branch", "re_lam", "im_lam"],
              [(n.k, spectrum.branch_label(n.branch), n.lam.real, n.lam.imag) for n in table])
    write_csv(os.path.join(out, "theta.csv"), ["k", "branch", "re_theta", "im_theta"],
              [(n.k, spectrum.branch_label(n.branch), n.theta.real, n.theta.imag) for n in table])
    write_csv(os.path.join(out, "mu_tilde.csv"), ["k", "branch", "re", "im"],
              [(n.k, spectrum.branch_label(n.branch), n.mu_tilde.real, n.mu_tilde.imag)
               for n in table])
    rows = spectrum.figure_rows(kmax)
    write_csv(os.path.join(out, "denominator_u.csv"), ["k", "branch", "abs_den_u"],
              [(r[0], r[1], r[6]) for r in rows])
    write_csv(os.path.join(out, "denominator_v.csv"), ["k", "branch", "abs_den_v_printed", "abs_den_v"],
              [(r[0], r[1], r[7], r[8]) for r in rows])
    gaps = []
    for K in range(1, kmax + 1):
        g, pair = spectrum.spectral_gap(K)
        gaps.append((K, g, f"{pair[0][0]}:{pair[0][1]}", f"{pair[1][0]}:{pair[1][1]}"))
    write_csv(os.path.join(out, "gap.csv"), ["K", "min_gap", "label_a", "label_b"], gaps)
    vieta = []
    for k in range(-kmax, kmax + 1):
        if k == 0:
            continue
        lp, lm = spectrum.eigenvalues(k)
        p, q = spectrum.modal_quadratic(k)
        vieta.append((k, abs(lp + lm + p) / abs(p), abs(lp * lm - q) / abs(q)))
    write_csv(os.path.join(out, "vieta.csv"), ["k", "rel_sum", "rel_product"], vieta)
    du, dvp, dv = spectrum.denominator_check(kmax)
    rs, rp = spectrum.vieta_residuals(kmax)
    summary.update({"min_gap": gaps[-1][1], "min_den_u": du, "min_den_v_printed": dvp,
                    "min_den_v": dv, "vieta_sum": rs, "vieta_product": rp})
    summary["checks_pass"] = bool(min(gaps[-1][1], du, dvp, dv) > 0 and max(rs, rp) <= 1e-9)
    write_json(os.path.join(out, "spectrum.json"), summary)
    if not summary["checks_pass"]:
        raise CheckFailed("spectral positivity or Vieta check failed")
    return summary


def cmd_biortho(args):
    T = args.T if args.T is not None else 1.0
    K = args.kmax if args.kmax is not None else 6
    if K < 1 or T <= 0:
        raise UsageError("need kmax >= 1 and T > 0")
    out = _outdir(args.out or ".")
    fam = biortho.mode_family(T, K)
    bio = biortho.gram_biorthogonal(fam, precision="full")
    meta = bio.metadata()
    meta["norms"] = biortho.norm_report(bio)
    write_json(os.path.join(out, "biortho.json"), meta)
    rows = []
    for j, (k, br) in enumerate(fam.labels):
        for l, (kl, bl) in enumerate(fam.labels):
            c = complex(bio.coeffs[l, j])
            rows.append((k, br, kl, bl, c.real, c.imag))
    write_csv(os.path.join(out, "theta_coeffs.csv"),
              ["k", "branch", "exp_k", "exp_branch", "re_c", "im_c"], rows)
    return meta


def _problem(cfg, init):
    profile, _ = _profile(cfg)
    return mc.build_problem(cfg["scenario"], init, cfg["T"], cfg["kc"], profile, cfg["window"])


def cmd_synthesize(args):
    cfg = resolve(args)
    init = _load_init(args.init)
    prob = _problem(cfg, init)
    sig = mc.synthesize(prob, precision=cfg["precision"])
    res = mc.moment_residuals(sig, prob)
    out = _outdir(cfg["out"])
    sig.save(os.path.join(out, "control.json"))
    ts = np.linspace(0, prob.T, 201)
    vals = sig.evaluate(ts)
    write_csv(os.path.join(out, "control.csv"), ["t", "re_g", "im_g"],
              [(t, v.real, v.imag) for t, v in zip(ts, vals)])
    report = {"scenario": prob.scenario, "T": prob.T, "K_c": prob.K_c, "window": prob.window,
              "dps": sig.dps, "log10_cond_scaled": sig.meta["log10_cond_scaled"],
              "max_scaled_residual": res["max_scaled"], "max_log10_abs_residual": res["max_log10_abs"],
              "max_terminal_mode": res["max_terminal"], "leak_max": res["leak_max"],
              "control_l2": sig.l2_norm(), "rows": res["rows"]}
    write_json(os.path.join(out, "residuals.json"), report)
    if res["max_scaled"] > 1e-8:
        raise CheckFailed(f"moment residual {res['max_scaled']:.3g} above 1e-8")
    return report


def _simulate(cfg, init, control_path):
    profile, _ = _profile(cfg)
    T = cfg["T"]
    if control_path:
        if not os.path.exists(control_path):
            raise UsageError(f"control file {control_path} not found")
        sig = mc.ControlSignal.load(control_path)
        if abs(sig.T - T) > 1e-12:
            raise UsageError(f"control horizon T={sig.T} does not match config T={T}")
        K_c = sig.meta.get("K_c", cfg["kc"])
        kmax_sim = cfg["kmax_sim"] or max(init.kmax, K_c or 0) + 24
        tr = pde_sim.evolve_controlled(init, T, cfg["scenario"], sig, profile,
                                       times=np.linspace(0, T, 21), kmax_sim=kmax_sim)
    else:
        K_c = cfg["kc"]
        tr = pde_sim.evolve_free(init, T, times=np.linspace(0, T, 21), kmax_sim=cfg["kmax_sim"])
    return tr, K_c


def cmd_simulate(args):
    cfg = resolve(args)
    init = _load_init(args.init)
    tr, K_c = _simulate(cfg, init, args.control)
    out = _outdir(cfg["out"])
    tr.to_csv(os.path.join(out, "trajectory.csv"))
    rep = pde_sim.terminal_report(tr, K_c)
    rep["initial_dual_norm"] = fs.state_dual_norm(init)
    write_json(os.path.join(out, "simulation.json"), rep)
    return rep


def cmd_verify(args):
    cfg = resolve(args)
    init = _load_init(args.init)
    if not args.control:
        raise UsageError("--control is required")
    tr, K_c = _simulate(cfg, init, args.control)
    rep = pde_sim.terminal_report(tr, K_c)
    d0 = fs.state_dual_norm(init)
    rep["initial_dual_norm"] = d0
    rep["tol"] = cfg["tol"]
    rep["pass"] = bool(rep["dual_norm"] <= cfg["tol"] * d0)
    write_json(os.path.join(_outdir(cfg["out"]), "verify.json"), rep)
    if not rep["pass"]:
        raise CheckFailed(f"terminal dual norm {rep['dual_norm']:.3g} above tol x initial")
    return rep


def run_estimates(T, K=6):
    """Estimate suite: multiplier/product bounds, Theta-norm envelopes, auxiliary integral checks."""
    rep = {"T": T, "bounds": ef.bound_checks(T)}
    bio = biortho.gram_biorthogonal(biortho.mode_family(T, K))
    nr = biortho.norm_report(bio)
    rep["theta_norms"] = {"C_plus": nr["C_plus"], "C_minus": nr["C_minus"],
                          "c_minus": nr["c_minus"], "theta0_norm": nr["theta0_norm"],
                          "holds": bool(np.isfinite(nr["C_plus"]) and np.isfinite(nr["C_minus"])
                                        and nr["C_plus"] > 0 and nr["C_minus"] > 0),
                          "rows": nr["rows"]}
    supA, _ = ef.verify_theta_bounded()
    rep["theta_bound"] = {"sup_abs_theta": supA, "holds": bool(np.isfinite(supA))}
    rows = []
    for x in (0, 1, -1, 10, -10, 100, -100, 1e4, -1e4):
        I, lo, hi = ef.verify_beta_integral(x)
        rows.append({"x": x, "I": I, "lower": lo, "upper": hi})
    rep["beta_integral"] = {"rows": rows, "I0": rows[0]["I"],
                             "holds": all(r["lower"] <= r["I"] <= r["upper"] for r in rows)}
    rep["all_hold"] = bool(all(v["holds"] for v in rep["bounds"].values())
                           and rep["theta_norms"]["holds"] and rep["theta_bound"]["holds"]
                           and rep["beta_integral"]["holds"])
    return rep


def cmd_estimates(args):
    T = args.T if args.T is not None else 2 * np.pi
    if T <= 0:
        raise UsageError("T must be positive")
    rep = run_estimates(T)
    write_json(os.path.join(_outdir(args.out or "."), "estimates.json"), rep)
    if not rep["all_hold"]:
        raise CheckFailed("an estimate check failed")
    return rep


def cmd_figures(args):
    T = args.T if args.T is not None else 2 * np.pi
    out = _outdir(args.out or ".")
    ns = argparse.Namespace(kmax=args.kmax if args.kmax is not None else 50, out=out)
    cmd_spectrum(ns)
    x = np.logspace(0, 3, 61)
    specs = ef.default_specs(T, 1.1e3)
    lp = ef.log_P(x + 0j)[0].real
    l1 = ef.log_multiplier(x + 0j, specs[0]).real
    l2 = ef.log_multiplier(x + 0j, specs[1]).real
    bP = -np.log(x) + ef.SQ2 * np.pi * np.sqrt(x) + 2 * ef.SQ2 * np.pi * x**0.25
    b1 = np.log(x) - ef.SQ2 * np.pi * np.sqrt(x)
    b2 = np.log(x) - 2 * ef.SQ2 * np.pi * x**0.25
    write_csv(os.path.join(out, "entire_functions.csv"),
              ["x", "log_P", "log_M1", "log_M2", "bound_P", "bound_M1", "bound_M2"],
              zip(x, lp, l1, l2, bP, b1, b2))
    return {"out": out}


COMMANDS = {"spectrum": cmd_spectrum, "biortho": cmd_biortho, "synthesize": cmd_synthesize,
            "simulate": cmd_simulate, "verify": cmd_verify, "estimates": cmd_estimates,
            "figures": cmd_figures}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    p = _Parser(prog="kscontrol", description="Moment-method null controllability toolkit")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config")
        s.add_argument("--T", type=float)
        s.add_argument("--kmax", type=int)
        s.add_argument("--kc", type=int)
        s.add_argument("--scenario")
        s.add_argument("--init")
        s.add_argument("--control")
        s.add_argument("--out")
        s.add_argument("--tol", type=float)
        s.add_argument("--rho-poly", dest="rho_poly")
        s.add_argument("--alpha", type=float)
        s.add_argument("--window", type=float)
        s.add_argument("--precision", choices=("terminal", "moments"))
        s.add_argument("--kmax-sim", dest="kmax_sim", type=int)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        if not args.command:
            raise UsageError("a subcommand is required: " + " | ".join(COMMANDS))
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error:usage: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except mc.CompatibilityError as exc:
        print(f"error:constraint: {exc}", file=sys.stderr)
        return EXIT_CONSTRAINT
    except CheckFailed as exc:
        print(f"error:numeric: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except Exception as exc:  # every other failure is numeric by construction
        msg = str(exc).replace("\n", " ")
        print(f"error:numeric: {type(exc).__name__}: {msg}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
