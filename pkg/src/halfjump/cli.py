"""Command-line harness: config loading, subcommands and report emission.

Config files are INI with the sections ``kernel``, ``quadrature``,
``simulation``, ``green1d`` and ``run``.  Every loaded config has one
canonical text form, and its sha256 labels the output directory.
"""
import argparse
import configparser
import hashlib
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, acceptance, scalefn
from .characteristic_constant import admissible_range, big_c, solve_p
from .green1d import assemble, boundary_decay_check, envelope, envelope_ratios, green_potential
from .kernel_core import KernelSpec, jump_kernel, make_b_model
from .nonlocal_operator import apply_pv_generator, power
from .report import loglog_plot, provenance, write_csv
from .resurrection import ResurrectionB, ReturnKernel, envelope_constant, q_comparator, q_kernel
from .simulator import SimConfig, exit_probability, harmonic_ratio_suite


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "kernel": {"d": "1", "alpha": "1.5", "kappa": "0", "b_model": "unit"},
    "quadrature": {"tol": "1e-9"},
    "simulation": {"paths": "20000", "eps_abs": "1e-6", "max_steps": "20000", "killing": "auto", "r": "1"},
    "green1d": {"cells": "256", "R": "1", "grading": "2"},
    "run": {"seed": "0", "out": "out"},
}
INT_KEYS = {("kernel", "d"), ("simulation", "paths"), ("simulation", "max_steps"),
            ("green1d", "cells"), ("run", "seed")}
TEXT_KEYS = {("kernel", "b_model"), ("simulation", "killing"), ("run", "out"), ("run", "label")}


def _canonical_value(section, key, raw):
    raw = raw.strip()
    if (section, key) in TEXT_KEYS or key.endswith("_kind") or key == "kind":
        return raw.lower() if key != "out" else raw
    try:
        if (section, key) in INT_KEYS:
            return str(int(raw))
        return repr(float(raw))
    except ValueError:
        return raw


@dataclass
class ExperimentConfig:
    sections: dict = field(default_factory=dict)

    def get(self, section, key):
        return self.sections[section][key]

    def canonical(self, skip=()):
        lines = []
        for sec in sorted(self.sections):
            lines.append(f"[{sec}]")
            for k in sorted(self.sections[sec]):
                if (sec, k) not in skip:
                    lines.append(f"{k} = {self.sections[sec][k]}")
            lines.append("")
        return "\n".join(lines)

    @property
    def digest(self):
        """Hash of everything that affects results; output location excluded."""
        text = self.canonical(skip={("run", "out"), ("run", "label")})
        return hashlib.sha256(text.encode()).hexdigest()

    @property
    def seed(self):
        return int(self.get("run", "seed"))

    def kernel_spec(self):
        k = self.sections["kernel"]
        d, alpha, kappa = int(k["d"]), float(k["alpha"]), float(k["kappa"])
        name = k["b_model"]
        params = {key: v for key, v in k.items() if key not in ("d", "alpha", "kappa", "b_model")}
        if name == "resurrection":
            psi = scalefn.from_config({key[4:]: v for key, v in params.items() if key.startswith("psi_")})
            b = ResurrectionB(ReturnKernel(d, alpha, psi))
        else:
            b = make_b_model(name, params)
        return KernelSpec(d, alpha, b, kappa)

    def sim_config(self, seed=None):
        s = self.sections["simulation"]
        spec = self.kernel_spec()
        killing = s["killing"]
        if killing == "auto":
            killing = "none" if spec.kappa == 0 else "expected_time"
        return SimConfig(spec, eps_abs=float(s["eps_abs"]), max_steps=int(s["max_steps"]),
                         seed=self.seed if seed is None else seed, killing=killing)


def parse_config(text=""):
    """Parse INI text, fill defaults and validate the kernel block."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(str(e)) from e
    unknown = set(cp.sections()) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown section(s): {sorted(unknown)}")
    sections = {}
    for sec, defaults in DEFAULTS.items():
        block = dict(defaults)
        if cp.has_section(sec):
            block.update(cp[sec])
        sections[sec] = {k: _canonical_value(sec, k, v) for k, v in block.items()}
    cfg = ExperimentConfig(sections)
    try:
        cfg.kernel_spec()
        if cfg.get("simulation", "killing") not in ("auto", "none", "expected_time"):
            raise ValueError("simulation.killing must be auto, none or expected_time")
    except (ValueError, KeyError) as e:
        raise ConfigError(f"invalid kernel configuration: {e}") from e
    return cfg


def load_config(path=None):
    return parse_config(Path(path).read_text() if path else "")


# ------------------------------------------------------------ subcommands

def _out_dir(cfg, name, label=None):
    label = label or cfg.sections["run"].get("label") or cfg.digest[:12]
    return Path(cfg.get("run", "out")) / name / label


def _header(cfg, **extra):
    return provenance(cfg.seed, cfg.digest, extra)


def cmd_kernels(cfg, args):
    spec = cfg.kernel_spec()
    out = _out_dir(cfg, "kernels", args.label)
    x, y = acceptance.envelope_grid(spec.d)
    pad = lambda p: np.c_[np.zeros((p.shape[0], 2 - spec.d)), p]
    if isinstance(spec.b_model, ResurrectionB):
        kern = spec.b_model.kern
        q = q_kernel(kern, x, y)
        comp = q_comparator(kern, x, y)
        ratio = q / comp
        c = envelope_constant(ratio)
        rows = [(*a, *b, qq, cc, r) for a, b, qq, cc, r in zip(pad(x), pad(y), q, comp, ratio)]
        f = write_csv(out / "envelope.csv", ["x1", "xd", "y1", "yd", "q", "comparator", "ratio"], rows,
                      _header(cfg, C=c))
        loglog_plot(out / "envelope.svg", {"q / comparator": (y[:, -1], ratio)}, "y_d", "ratio")
        print(f"envelope constant C = {c:.4g} over {ratio.size} pairs; ratios in [{ratio.min():.4g}, "
              f"{ratio.max():.4g}]")
    else:
        b = spec.b_model(x, y)
        j = jump_kernel(spec, x, y)
        rows = [(*a, *bb, v, jj) for a, bb, v, jj in zip(pad(x), pad(y), b, j)]
        f = write_csv(out / "boundary_factor.csv", ["x1", "xd", "y1", "yd", "B", "J"], rows, _header(cfg))
        loglog_plot(out / "boundary_factor.svg", {"B": (y[:, -1], b)}, "y_d", "B(x, y)")
    print(f"wrote {f}")
    return 0


def cmd_constants(cfg, args):
    spec = cfg.kernel_spec()
    out = _out_dir(cfg, "constants", args.label)
    lo, hi = admissible_range(spec)
    left = max(spec.alpha - 1.0, 0.0)
    tol = float(cfg.get("quadrature", "tol"))
    qs = np.linspace(lo, hi, 42)[1:-1]
    cs = [big_c(spec, q, tol) for q in qs]
    f1 = write_csv(out / "c_curve.csv", ["q", "C"], zip(qs, cs), _header(cfg, alpha=spec.alpha))
    loglog_plot(out / "c_curve.svg", {"C(q)": (qs - lo, np.abs(cs))}, "q - lower end", "|C(q)|")
    kappas = {spec.kappa}
    if spec.alpha > 1:
        kappas.add(0.0)
    for q in np.linspace(left, hi, 9)[1:-1]:
        kappas.add(float(big_c(spec, q, tol)))
    rows = []
    for kappa in sorted(kappas):
        res = solve_p(spec, kappa, tol)
        rows.append((kappa, res.p, res.residual, res.iterations))
        print(f"kappa = {kappa:.8g}  ->  p = {res.p:.8g}")
    f2 = write_csv(out / "decay_exponents.csv", ["kappa", "p", "residual", "iterations"], rows,
                   _header(cfg, alpha=spec.alpha))
    print(f"wrote {f1} and {f2}")
    return 0


def cmd_operator(cfg, args):
    spec = cfg.kernel_spec()
    out = _out_dir(cfg, "operator", args.label)
    p = spec.p
    tol = float(cfg.get("quadrature", "tol"))
    rows = []
    for x in acceptance.harmonic_points(spec.d):
        r = apply_pv_generator(spec, power(p), x, tol=tol)
        resid = abs(r.value) * x[-1] ** (spec.alpha - p) / (spec.kappa + 1.0)
        rows.append((*np.r_[np.zeros(2 - spec.d), x], r.generator, r.value, resid, r.contraction))
    f = write_csv(out / "harmonic_power.csv",
                  ["x1", "xd", "generator", "value_with_killing", "scaled_residual", "cutoff_contraction"],
                  rows, _header(cfg, p=p))
    print(f"p = {p:.8g}; max scaled residual {max(r[4] for r in rows):.3g}; wrote {f}")
    return 0


def cmd_simulate(cfg, args):
    seed = cfg.seed if args.seed is None else args.seed
    sim = cfg.sim_config(seed)
    d = sim.spec.d
    n = args.paths or int(cfg.get("simulation", "paths"))
    r = float(cfg.get("simulation", "r"))
    out = _out_dir(cfg, f"simulate_{args.scenario}", args.label)
    if args.scenario == "exit":
        fr = 2.0 ** -np.arange(8, 3, -1)
        rows = []
        for f in fr:
            o = exit_probability(sim, np.r_[np.zeros(d - 1), f * r], r, n)
            rows.append((f * r, o["estimate"], o["ci_low"], o["ci_high"], o["absorbed"], o["budget"]))
        est = np.array([row[1] for row in rows])
        slope = float(np.polyfit(np.log(fr), np.log(est), 1)[0])
        path = write_csv(out / "exit_probability.csv",
                         ["x_d", "estimate", "ci_low", "ci_high", "absorbed", "budget"], rows,
                         provenance(seed, cfg.digest, {"paths": n, "r": r, "slope": slope}))
        loglog_plot(out / "exit_probability.svg", {"estimate": (fr * r, est)}, "x_d", "exit probability")
        print(f"slope {slope:.4f} (p = {sim.spec.p:.4f})")
    else:
        rep = harmonic_ratio_suite(sim, args.scenario, r, n)
        rows = [(*np.r_[np.zeros(2 - d), pr], fv, se) for pr, fv, se in zip(rep["probes"], rep["f"], rep["se"])]
        path = write_csv(out / f"{args.scenario}.csv", ["x1", "xd", "f", "se"], rows,
                         provenance(seed, cfg.digest, {"paths": n, "r": r, "constant": rep["constant"]}))
        print(f"{args.scenario} constant {rep['constant']:.4g}")
    print(f"wrote {path}")
    return 0


def cmd_green1d(cfg, args):
    spec = cfg.kernel_spec()
    if spec.d != 1:
        raise ConfigError("green1d needs d = 1")
    g = cfg.sections["green1d"]
    cells = args.cells or int(g["cells"])
    out = _out_dir(cfg, "green1d", args.label)
    system = assemble(spec, float(g["R"]), cells, grading=float(g["grading"]))
    X, Y, G, ratio = envelope_ratios(system)
    env = envelope(system.alpha, system.p, X, Y)
    c = envelope_constant(ratio)
    decay = boundary_decay_check(system, x_range=(1e-4, 1e-2))
    hdr = _header(cfg, cells=cells, p=system.p, C=c, decay_slope=decay["slope"])
    f1 = write_csv(out / "green.csv", ["x", "y", "G", "envelope", "ratio"], zip(X, Y, G, env, ratio), hdr)
    pot = {gam: green_potential(system, gam) for gam in (0.0, 0.5)}
    f2 = write_csv(out / "potential.csv", ["x", "potential_gamma0", "potential_gamma0.5"],
                   zip(system.nodes, pot[0.0], pot[0.5]), hdr)
    j = int(np.searchsorted(system.nodes, 0.25 * system.R))
    loglog_plot(out / "decay.svg", {"G(x, R/4)": (system.nodes, system.G_matrix[:, j]),
                                    "potential": (system.nodes, pot[0.0])}, "x", "value")
    print(f"p = {system.p:.6g}; envelope constant {c:.4g}; decay slope {decay['slope']:.4f}")
    print(f"wrote {f1} and {f2}")
    return 0


def cmd_acceptance(cfg, args):
    out = Path(cfg.get("run", "out")) / "acceptance" / (args.label or f"seed{cfg.seed}")
    numbers = args.only or None
    results = acceptance.run_all(out, cfg.seed, numbers, determinism=not args.skip_determinism)
    for r in results:
        print(r.line(), flush=True)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed" +
          (f"; failed: {failed}" if failed else ""))
    return 1 if failed else 0


COMMANDS = {"kernels": cmd_kernels, "constants": cmd_constants, "operator": cmd_operator,
            "simulate": cmd_simulate, "green1d": cmd_green1d, "acceptance": cmd_acceptance}


def build_parser():
    ap = argparse.ArgumentParser(prog="halfjump", description="Half-space jump process experiments.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", "-c", help="INI config file (defaults used when omitted)")
        sp.add_argument("--out", help="override run.out")
        sp.add_argument("--label", help="output sub-directory name (default: config hash prefix)")
        if name == "simulate":
            sp.add_argument("--scenario", choices=["exit", "harnack", "carleson", "bhp"], default="exit")
            sp.add_argument("--paths", type=int)
            sp.add_argument("--seed", type=int)
        if name == "green1d":
            sp.add_argument("--cells", type=int)
        if name == "acceptance":
            sp.add_argument("--only", type=int, nargs="+", choices=sorted(acceptance.CRITERIA))
            sp.add_argument("--skip-determinism", action="store_true")
    sub.add_parser("canonical", help="print the canonical form of a config").add_argument("--config", "-c")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "canonical":
            sys.stdout.write(cfg.canonical())
            return 0
        if args.out:
            cfg.sections["run"]["out"] = args.out
        return COMMANDS[args.command](cfg, args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
