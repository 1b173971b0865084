"""Batch front door: deterministic experiment execution with table/figure output.

Exit codes: 0 success, 2 config error, 3 assumption-audit failure, 4 solver
failure, 5 verdict failure.  Identical config and seed produce byte-identical
CSV/JSON outputs; figures are rendered next to them.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

EXIT_CONFIG = 2
EXIT_AUDIT = 3
EXIT_SOLVER = 4
EXIT_VERDICT = 5

COMMANDS = ("check-assumptions", "lorentz-suite", "potentials", "spectrum",
            "converge", "uv-sweep")


def _parser():
    parser = argparse.ArgumentParser(
        prog="qclab",
        description="quasi-classical effective-operator laboratory")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON config path or preset name")
    parser.add_argument("--out", default="qclab_out", help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--threads", type=int, default=None,
                        help="thread budget for numerics backends")
    parser.add_argument("--strict", action="store_true",
                        help="assumption-audit failures abort every command")
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.threads is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)

    from . import __version__
    from . import presets
    from .report import config_hash

    try:
        if args.config in presets.PRESETS:
            cfg = presets.load_config({"include": args.config})
        else:
            cfg = presets.load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
    except presets.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    prov = {"config_hash": config_hash(cfg), "code_version": __version__,
            "seed": cfg["seed"]}
    out_dir = Path(args.out)

    try:
        audit = _run_audit(cfg)
    except presets.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    audit_ok = all(entry["passed"] for entry in audit)
    if args.command == "check-assumptions" or (args.strict and not audit_ok):
        return _emit_audit(cfg, prov, out_dir, audit)

    try:
        if args.command == "lorentz-suite":
            return _cmd_lorentz(cfg, prov, out_dir)
        if args.command == "potentials":
            return _cmd_potentials(cfg, prov, out_dir)
        if args.command == "spectrum":
            return _cmd_spectrum(cfg, prov, out_dir)
        if args.command == "converge":
            return _cmd_converge(cfg, prov, out_dir)
        if args.command == "uv-sweep":
            return _cmd_uv(cfg, prov, out_dir)
    except presets.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # solver-class failures
        from .fock import TruncationError
        from .operators import NegativeFormError, SolverError
        if isinstance(exc, (SolverError, NegativeFormError, TruncationError, ValueError)):
            print(f"solver error: {exc}", file=sys.stderr)
            return EXIT_SOLVER
        raise
    raise AssertionError("unreachable command")


# ---------------------------------------------------------------------------
# assumption audit


def _run_audit(cfg) -> list:
    import numpy as np
    from . import presets
    from . import potentials as pots
    from .operators import klmn_bound, ParticleGrid

    entries = []
    omega_fn = presets.dispersion_fn(cfg)
    entries.append({
        "name": "dispersion_linear_growth",
        "passed": bool(min(omega_fn(np.array([4.0, 8.0, 16.0]))
                           / np.array([4.0, 8.0, 16.0])) > 0.0),
        "detail": "liminf omega/|k| proxy on the audit radii",
    })

    chi_spec = cfg.get("chi", {"preset": "one"})
    chi_fn = pots.make_chi(chi_spec.get("preset", "one"), chi_spec.get("cutoff"),
                           chi_spec.get("width"))
    weak = pots.audit_radial_weak_norm(lambda r: chi_fn(r) / omega_fn(r))
    entries.append({
        "name": "chi_over_omega_weak_norm",
        "passed": bool(weak["stable"]),
        "detail": {"values": weak["values"], "radii": weak["radii"]},
    })
    if cfg.get("model", "nelson") == "pauli_fierz":
        sup = pots.audit_radial_sup(lambda r: r * chi_fn(r) / omega_fn(r))
        entries.append({
            "name": "k_chi_over_omega_sup",
            "passed": bool(sup["stable"]),
            "detail": {"values": sup["values"], "radii": sup["radii"]},
        })

    if "particle_grid" in cfg:
        from . import presets as P
        grid = P.build_particle_grid(cfg)
        audit_grid = grid if grid.boundary == "periodic" else ParticleGrid(
            grid.dimension, grid.points_per_axis, grid.box_length, "periodic", 1)
        if audit_grid.spinor_dim != 1:
            audit_grid = ParticleGrid(audit_grid.dimension, audit_grid.points_per_axis,
                                      audit_grid.box_length, "periodic", 1)
        u_pot = P.build_external_potential(cfg, grid)
        if np.any(u_pot.u_minus > 0):
            grid_u = P.build_external_potential(cfg, audit_grid)
            witness = klmn_bound(grid_u.u_minus, audit_grid)
            entries.append({
                "name": "u_minus_klmn_bound",
                "passed": bool(witness.admissible and witness.a < 1.0),
                "detail": {"a": witness.a, "b": witness.b},
            })
        else:
            entries.append({"name": "u_minus_klmn_bound", "passed": True,
                            "detail": "U_- vanishes"})

    if "family" in cfg and "mode_grid" in cfg:
        from . import presets as P
        basis = P.build_mode_basis(cfg)
        dispersion = P.build_dispersion(cfg, basis)
        family = P.build_family_from_config(cfg, basis, dispersion)
        sup = family.energy_uniformity(P.sweep_epsilons(cfg))
        entries.append({
            "name": "family_energy_uniformity",
            "passed": bool(np.isfinite(sup["sup_nelson_functional"])
                           and np.isfinite(sup["sup_pf_functional"])),
            "detail": sup,
        })
        entries.append({
            "name": "dispersion_growth_on_grid",
            "passed": bool(dispersion.linear_growth_floor(basis) > 0.0),
            "detail": {"floor": dispersion.linear_growth_floor(basis)},
        })
    return entries


def _emit_audit(cfg, prov, out_dir, audit) -> int:
    from .report import report_payload, write_csv, write_json
    write_json(out_dir / "assumption_audit.json",
               report_payload("check-assumptions", cfg, prov, {"audit": audit}))
    rows = [(e["name"], e["passed"]) for e in audit]
    write_csv(out_dir / "assumption_audit.csv", ("functional", "passed"), rows, prov)
    failed = [e["name"] for e in audit if not e["passed"]]
    for name in failed:
        print(f"assumption audit FAILED: {name}", file=sys.stderr)
    if failed:
        return EXIT_AUDIT
    print("assumption audit passed")
    return 0


# ---------------------------------------------------------------------------
# commands


def _cmd_lorentz(cfg, prov, out_dir) -> int:
    from . import lorentz
    from .report import (ratio_refinement_figure, report_payload, write_csv,
                         write_json, write_plot_data)

    params = cfg.get("lorentz", {})
    sizes = params.get("grid_sizes", [16, 24, 32])
    box = params.get("box", 8.0)
    corpus_size = params.get("corpus_size", 5)
    seed = cfg["seed"]
    t0 = time.time()
    weak = lorentz.weak_norm_inverse_k(params.get("weak_norm_points", 64))
    rows = []
    suites = (("holder", lorentz.run_holder_suite(seed, sizes, box, corpus_size=corpus_size)),
              ("young", lorentz.run_young_suite(seed, sizes, box,
                                                corpus_size=max(3, corpus_size - 2))),
              ("embedding", lorentz.run_embedding_suite(seed, sizes, box,
                                                        corpus_size=corpus_size)),
              ("fourier_product", lorentz.run_fourier_product_suite(
                  seed, sizes, box, corpus_size=max(3, corpus_size - 2))))
    for corpus_id, suite_rows in suites:
        for r in suite_rows:
            rows.append((corpus_id, r["lemma_id"], r["grid_size"],
                         r["ratio_max"], r["ratio_p95"]))
    target = 3.0 ** (2.0 / 3.0) * (4.0 * 3.141592653589793) ** (1.0 / 3.0)
    rows.append(("weak_norm", "inverse_k_L3inf", params.get("weak_norm_points", 64),
                 weak, weak))
    write_csv(out_dir / "lorentz_suite.csv",
              ("corpus_id", "lemma_id", "grid_size", "ratio_max", "ratio_p95"),
              rows, prov)
    stability = _ratio_stability(rows)
    body = {
        "weak_norm_inverse_k": weak,
        "weak_norm_target": target,
        "weak_norm_rel_err": abs(weak - target) / target,
        "stability": stability,
        "runtime_s": time.time() - t0,
    }
    write_json(out_dir / "lorentz_suite.json",
               report_payload("lorentz-suite", cfg, prov, body))
    suite_dicts = [r for _, srows in suites for r in srows]
    ratio_refinement_figure(out_dir / "lorentz_ratios.png", suite_dicts,
                            "inequality ratios under refinement")
    for corpus_id, srows in suites:
        lemmas = sorted({r["lemma_id"] for r in srows})
        for lemma in lemmas:
            xs = [r["grid_size"] for r in srows if r["lemma_id"] == lemma]
            ys = [r["ratio_max"] for r in srows if r["lemma_id"] == lemma]
            write_plot_data(out_dir / f"plotdata_{lemma}.csv", xs, ys, prov,
                            ("grid_size", "ratio_max"))
    ok = body["weak_norm_rel_err"] <= 0.05 and all(
        v <= 0.20 for v in stability.values())
    print(f"lorentz-suite: weak-norm rel err {body['weak_norm_rel_err']:.3%}, "
          f"max refinement drift {max(stability.values()):.3%}")
    return 0 if ok else EXIT_VERDICT


def _ratio_stability(rows) -> dict:
    by_lemma = {}
    for corpus_id, lemma, size, rmax, _ in rows:
        if corpus_id == "weak_norm":
            continue
        by_lemma.setdefault(lemma, []).append(rmax)
    return {lemma: (max(vals) - min(vals)) / max(min(vals), 1e-300)
            for lemma, vals in by_lemma.items()}


def _cmd_potentials(cfg, prov, out_dir) -> int:
    import numpy as np
    from . import presets, potentials as pots
    from .report import field_slice_figure, report_payload, write_json

    plan = presets.build_plan(cfg)
    eps = plan.epsilons[0]
    fields = {}
    if plan.model == "nelson":
        fields["V_eps"] = pots.v_eps(plan.family, eps, plan.coupling, plan.grid)
        fields["V_mu"] = pots.v_mu(plan.measure, plan.coupling, plan.grid)
    else:
        fields["A_eps"] = pots.a_eps(plan.family, eps, plan.coupling, plan.grid)
        fields["A_mu"] = pots.a_mu(plan.measure, plan.coupling, plan.grid)
        fields["W_eps"] = pots.w_eps(plan.family, eps, plan.coupling, plan.grid)[0]
        fields["W_mu"] = pots.w_mu(plan.measure, plan.coupling, plan.grid)
        fields["B_eps"] = pots.curl_of(fields["A_eps"])
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = {}
    for name, pot in fields.items():
        np.save(out_dir / f"{name}.npy", pot.values)
        meta[name] = {
            "kind": pot.kind,
            "provenance": pot.provenance,
            "grid": {"dimension": plan.grid.dimension,
                     "points": plan.grid.points_per_axis,
                     "box": plan.grid.box_length,
                     "boundary": plan.grid.boundary},
            "coupling": {"kind": plan.coupling.coupling_kind,
                         "chi": plan.coupling.chi_name},
            "max_abs": pot.max_abs(),
        }
    write_json(out_dir / "potentials.json",
               report_payload("potentials", cfg, prov, {"fields": meta, "epsilon": eps}))
    field_slice_figure(out_dir / "potentials_slice.png", plan.grid,
                       {k: v.values for k, v in fields.items()},
                       f"effective fields at eps={eps:g}")
    print(f"potentials: exported {len(fields)} fields to {out_dir}")
    return 0


def _cmd_spectrum(cfg, prov, out_dir) -> int:
    import numpy as np
    from . import presets
    from .harness import build_form
    from .operators import lowest_eigenpairs
    from .report import report_payload, spectrum_figure, write_csv, write_json

    plan = presets.build_plan(cfg)
    count = cfg.get("spectrum", {}).get("count", 6)
    form = build_form(plan, None)
    vals, vecs = lowest_eigenpairs(form, count)
    residuals = [float(np.linalg.norm(form.apply(vecs[:, j]) - vals[j] * vecs[:, j]))
                 for j in range(count)]
    rows = [(j, vals[j], residuals[j]) for j in range(count)]
    write_csv(out_dir / "spectrum.csv", ("level", "eigenvalue", "residual"), rows, prov)
    write_json(out_dir / "spectrum.json",
               report_payload("spectrum", cfg, prov,
                              {"eigenvalues": list(map(float, vals)),
                               "residuals": residuals}))
    spectrum_figure(out_dir / "spectrum.png", vals, "limit-operator spectrum")
    print(f"spectrum: lowest {count} levels, max residual {max(residuals):.2e}")
    return 0


def _converge_reports(plan, cfg):
    from . import harness
    reports = [harness.state_convergence(plan), harness.potential_convergence(plan)]
    if plan.grid.boundary == "periodic":
        reports.append(harness.gamma_convergence_probe(plan))
    mode = cfg.get("resolvent_mode", "strong")
    modes = ("strong", "norm") if mode == "both" else (mode,)
    for m in modes:
        reports.append(harness.resolvent_convergence(plan, m))
    return reports


def _cmd_converge(cfg, prov, out_dir) -> int:
    from . import presets
    from .report import (metric_decay_figure, report_payload, write_csv,
                         write_json, write_plot_data)

    plan = presets.build_plan(cfg)
    reports = _converge_reports(plan, cfg)
    rows = []
    body = {}
    all_verdicts = {}
    for rep in reports:
        rows.extend((rep.name, r["metric"], r["epsilon"], r["value"]) for r in rep.rows)
        body[rep.name] = {"fits": rep.fits, "verdicts": rep.verdicts,
                          "notes": rep.notes}
        for key, val in rep.verdicts.items():
            all_verdicts[f"{rep.name}.{key}"] = val
        metric_decay_figure(out_dir / f"{rep.name}.png", rep, rep.name)
        for metric in sorted({r["metric"] for r in rep.rows}):
            eps, vals = rep.series(metric)
            write_plot_data(out_dir / f"plotdata_{rep.name}_{metric}.csv",
                            eps, vals, prov, ("epsilon", "value"))
    write_csv(out_dir / "convergence.csv",
              ("experiment", "metric", "epsilon", "value"), rows, prov)
    write_json(out_dir / "convergence.json",
               report_payload("converge", cfg, prov, body))
    failed = [k for k, v in all_verdicts.items() if v is False]
    for name in failed:
        print(f"verdict FAILED: {name}", file=sys.stderr)
    print(f"converge: {len(reports)} experiments, "
          f"{sum(len(r.rows) for r in reports)} metric rows, "
          f"{len(all_verdicts) - len(failed)}/{len(all_verdicts)} verdicts passed")
    return EXIT_VERDICT if failed else 0


def _cmd_uv(cfg, prov, out_dir) -> int:
    from . import presets
    from .harness import uv_commutation_experiment
    from .report import metric_decay_figure, report_payload, write_csv, write_json

    plan = presets.build_plan(cfg)
    schedules = presets.uv_schedules(cfg)
    report = uv_commutation_experiment(plan, schedules)
    rows = [(r["metric"], r["epsilon"], r["value"]) for r in report.rows]
    write_csv(out_dir / "uv_sweep.csv", ("metric", "epsilon", "value"), rows, prov)
    write_json(out_dir / "uv_sweep.json",
               report_payload("uv-sweep", cfg, prov,
                              {"fits": report.fits, "verdicts": report.verdicts,
                               "notes": report.notes}))
    metric_decay_figure(out_dir / "uv_sweep.png", report, "cutoff-removal schedules")
    if plan.model == "nelson":
        ok = report.verdicts.get("schedule_independent", False)
        print(f"uv-sweep: schedule independence {'PASS' if ok else 'FAIL'}")
        return 0 if ok else EXIT_VERDICT
    flags = report.notes["wick_bounded"]
    ok = all(flags[name] == presets.schedule_expected_bounded(name) for name in flags)
    print(f"uv-sweep: boundedness flags {flags} "
          f"({'as expected' if ok else 'UNEXPECTED'})")
    return 0 if ok else EXIT_VERDICT


if __name__ == "__main__":
    sys.exit(main())
