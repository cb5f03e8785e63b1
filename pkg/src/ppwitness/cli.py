"""Command-line entry point: configuration ingestion, run orchestration,
CSV persistence and the validation suite.

Exit codes: 0 success, 2 configuration/schema violation, 3 numerical
contract violation.  Failures print a one-line JSON error record to stderr.
All floating-point CSV values carry 17 significant digits, and every run
directory receives a copy of the fully resolved configuration.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .core import APC_PULSE_SIGMA_T_FS, DimerParams, apc_preset, coupling_ratio
from .dynamics import IntegratorError, exact_propagator
from .model import AmbiguityError, ResourceError, assemble, build_space, exciton_structure
from .optics import make_pulse_pairs
from .process import (
    ReducedChi,
    classical_hopping_chi,
    theoretical_chi_curve,
    witness_general,
    witness_wb,
)
from .protocol import (
    IllConditionedError,
    ProtocolConfig,
    build_inversion,
    ensemble_average,
    ensemble_signals,
    polarization_selective_pairs,
    run_witness_protocol,
    r_sweep,
    simulate_pair,
    weak_field_eta,
)

log = logging.getLogger("ppwitness")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

FLOAT_FMT = "%.17g"

CHI_HEADER = [
    "tau_fs",
    "chi_aaaa_mean", "chi_aaaa_std",
    "chi_aabb_mean", "chi_aabb_std",
    "chi_bbaa_mean", "chi_bbaa_std",
    "chi_bbbb_mean", "chi_bbbb_std",
]
WITNESS_HEADER = ["T1_fs", "T2_fs", "wb_sim", "wb_theory"]
RSWEEP_HEADER = ["r", "sigma"]
CONDITIONING_HEADER = ["pair_set", "kappa", "det"]

PARAMS_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "eps_a_cm1": {"type": "number"},
        "eps_b_cm1": {"type": "number"},
        "J_cm1": {"type": "number"},
        "omega_a_cm1": {"type": "number", "exclusiveMinimum": 0},
        "omega_b_cm1": {"type": "number", "exclusiveMinimum": 0},
        "g_a": {"type": "number"},
        "g_b": {"type": "number"},
        "delta_E_cm1": {"type": "number"},
        "mu_a": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3},
        "mu_b": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3},
    },
    "required": ["eps_a_cm1", "eps_b_cm1", "J_cm1", "omega_a_cm1", "omega_b_cm1", "g_a", "g_b"],
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "preset": {"enum": ["apc"]},
        "params": PARAMS_SCHEMA,
        "n_phon": {"type": "integer", "minimum": 0},
        "pulse": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "sigma_t_fs": {"type": "number", "exclusiveMinimum": 0},
                "eta": {"type": "number", "exclusiveMinimum": 0},
                "depletion": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.2},
                "auto_resonant": {"type": "boolean"},
                "carriers": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "plus_cm1": {"type": "number"},
                        "minus_cm1": {"type": "number"},
                    },
                    "required": ["plus_cm1", "minus_cm1"],
                },
            },
        },
        "plan": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dt_fs": {"type": "number", "exclusiveMinimum": 0},
                "frame": {"enum": ["lab", "rotating"]},
                "rwa": {"type": "boolean"},
            },
        },
        "protocol": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "T1_fs": {"type": "number", "exclusiveMinimum": 0},
                "T2_fs": {"type": "number", "exclusiveMinimum": 0},
                "tau_grid_fs": {"type": "array", "items": {"type": "number", "minimum": 0}},
                "n_orientations": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "recovery": {"enum": ["per_orientation", "averaged"]},
                "average_mode": {"enum": ["empirical", "isotropic"]},
                "sample_kappa_max": {"type": "number", "exclusiveMinimum": 0},
                "kappa_max": {"type": "number", "exclusiveMinimum": 0},
                "bootstrap": {"type": "integer", "minimum": 0},
                "fixed_orientation": {"type": "boolean"},
            },
        },
        "output_dir": {"type": "string"},
    },
}

DEFAULT_CONFIG = {
    "preset": "apc",
    "n_phon": 3,
    "pulse": {"sigma_t_fs": APC_PULSE_SIGMA_T_FS, "depletion": 0.0025, "auto_resonant": True},
    "plan": {"frame": "rotating", "rwa": True},
    "protocol": {
        "n_orientations": 2000,
        "seed": 0,
        "recovery": "per_orientation",
        "average_mode": "empirical",
        "sample_kappa_max": 300.0,
        "kappa_max": 1e6,
        "bootstrap": 200,
        "fixed_orientation": False,
    },
    "output_dir": "runs/ppwitness",
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path: str | None, overrides: dict) -> dict:
    raw = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    merged = _merge(_merge(DEFAULT_CONFIG, raw), overrides)
    try:
        jsonschema.validate(merged, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config schema violation: {exc.message}") from exc
    if "params" in merged and "preset" in merged and "preset" in raw and "params" in raw:
        raise ConfigError("give either 'preset' or 'params', not both")
    return merged


def params_from_config(cfg: dict) -> DimerParams:
    if "params" in cfg:
        q = cfg["params"]
        kwargs = dict(
            eps_a=q["eps_a_cm1"], eps_b=q["eps_b_cm1"], J=q["J_cm1"],
            omega_a=q["omega_a_cm1"], omega_b=q["omega_b_cm1"],
            g_a=q["g_a"], g_b=q["g_b"], delta_E=q.get("delta_E_cm1", 0.0),
        )
        if "mu_a" in q:
            kwargs["mu_a"] = np.array(q["mu_a"], dtype=float)
        if "mu_b" in q:
            kwargs["mu_b"] = np.array(q["mu_b"], dtype=float)
        return DimerParams(**kwargs)
    return apc_preset()


def protocol_config(cfg: dict) -> ProtocolConfig:
    params = params_from_config(cfg)
    n_phon = cfg["n_phon"]
    pulse = cfg["pulse"]
    structure = exciton_structure(assemble(params, build_space(n_phon)))
    sigma_t = pulse["sigma_t_fs"]
    eta = pulse.get("eta")
    if eta is None:
        eta = weak_field_eta(structure, sigma_t, pulse.get("depletion", 0.0025))
    carriers = None
    if "carriers" in pulse:
        carriers = (pulse["carriers"]["plus_cm1"], pulse["carriers"]["minus_cm1"])
    proto = cfg["protocol"]
    return ProtocolConfig(
        params=params,
        n_phon=n_phon,
        sigma_t=sigma_t,
        eta=eta,
        n_orientations=proto["n_orientations"],
        seed=proto["seed"],
        dt=cfg["plan"].get("dt_fs"),
        frame=cfg["plan"]["frame"],
        rwa=cfg["plan"]["rwa"],
        carriers=carriers,
        recovery=proto["recovery"],
        average_mode=proto["average_mode"],
        sample_kappa_max=proto["sample_kappa_max"],
        kappa_max=proto["kappa_max"],
        bootstrap=proto["bootstrap"],
        fixed_orientation=proto["fixed_orientation"],
    )


def write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [c if isinstance(c, str) else FLOAT_FMT % float(c) for c in row]
            )
    log.info("wrote %s", path)


def read_chi_curve(path: Path):
    with path.open() as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CHI_HEADER:
            raise ConfigError(
                f"chi curve header mismatch in {path}: expected {CHI_HEADER}, got {header}"
            )
        rows = np.array([[float(c) for c in row] for row in reader])
    if rows.size == 0:
        raise ConfigError(f"chi curve {path} has no rows")
    return rows[:, 0], rows[:, 1::2]  # taus, means (std columns skipped)


def resolve_out_dir(cfg: dict, override: str | None) -> Path:
    out = Path(override) if override else Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def dump_resolved_config(cfg: dict, out: Path) -> None:
    (out / "config.resolved.json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")


def chi_rows(taus, mean, std):
    for i, tau in enumerate(taus):
        row = [tau]
        for j in range(4):
            row.extend([mean[i, j], std[i, j]])
        yield row


# --- subcommands -------------------------------------------------------------


def cmd_chi_theory(cfg: dict, args) -> int:
    params = params_from_config(cfg)
    space = build_space(cfg["n_phon"])
    taus = np.asarray(
        cfg["protocol"].get("tau_grid_fs", np.linspace(0.0, args.t_max, args.n_times).tolist())
    )
    curve = theoretical_chi_curve(params, space, taus)
    out = resolve_out_dir(cfg, args.out)
    dump_resolved_config(cfg, out)
    write_csv(out / "chi_curve.csv", CHI_HEADER, chi_rows(taus, curve, np.zeros_like(curve)))
    return EXIT_OK


def _tau_worker(payload):
    cfg_obj, tau = payload
    signals, m_all, g_all = ensemble_signals(cfg_obj, [tau])
    return signals[0]


def cmd_protocol(cfg: dict, args) -> int:
    pcfg = protocol_config(cfg)
    out = resolve_out_dir(cfg, args.out)
    dump_resolved_config(cfg, out)
    proto = cfg["protocol"]
    space = build_space(cfg["n_phon"])

    if "tau_grid_fs" in proto:
        taus = np.asarray(proto["tau_grid_fs"], dtype=float)
        result = _ensemble_average_parallel(pcfg, taus, args.threads)
        write_csv(out / "chi_curve.csv", CHI_HEADER, chi_rows(taus, result.mean, result.std))
        theo = theoretical_chi_curve(pcfg.params, space, taus)
        write_csv(out / "chi_theory.csv", CHI_HEADER, chi_rows(taus, theo, np.zeros_like(theo)))
        log.info("ensemble kappa(averaged system) = %.6g, kept %d/%d samples",
                 result.kappa, result.n_kept, result.n_samples)
    else:
        if "T1_fs" not in proto or "T2_fs" not in proto:
            raise ConfigError("protocol needs either tau_grid_fs or both T1_fs and T2_fs")
        res = run_witness_protocol(pcfg, proto["T1_fs"], proto["T2_fs"])
        write_csv(
            out / "witness.csv",
            WITNESS_HEADER,
            [[res.point_sim.T1, res.point_sim.T2, res.point_sim.value, res.point_theory.value]],
        )
        taus = np.array([c.tau for c in res.chi_sim])
        mean = np.stack([c.vec for c in res.chi_sim])
        write_csv(out / "chi_curve.csv", CHI_HEADER,
                  chi_rows(taus, mean, np.stack([res.ensemble.std[i] for i in range(3)])))
        theo = np.stack([c.vec for c in res.chi_theory])
        write_csv(out / "chi_theory.csv", CHI_HEADER, chi_rows(taus, theo, np.zeros_like(theo)))
        log.info("W^b simulated = %.6g, theory = %.6g (%d experiments)",
                 res.point_sim.value, res.point_theory.value, res.n_experiments)

    structure = exciton_structure(assemble(pcfg.params, space))
    pairs = make_pulse_pairs(
        structure, pcfg.sigma_t, pcfg.eta, tau=1.0,
        e_pump=pcfg.e_pump, e_probe=pcfg.e_probe, carriers=pcfg.carriers,
    )
    system = build_inversion(pairs, structure, pcfg.pi_model)
    write_csv(
        out / "conditioning.csv",
        CONDITIONING_HEADER,
        [["frequency-targeted magic angle (fixed orientation)", system.kappa, system.det]],
    )
    return EXIT_OK


def _ensemble_average_parallel(pcfg: ProtocolConfig, taus, threads: int):
    if threads <= 1 or len(taus) <= 1 or pcfg.recovery != "per_orientation":
        return ensemble_average(pcfg, taus)
    # delays are independent; recover per-delay signals in workers, then do
    # the (cheap) recovery and bootstrap once, in a fixed order
    with ProcessPoolExecutor(max_workers=min(threads, len(taus))) as pool:
        parts = list(pool.map(_tau_worker, [(pcfg, float(t)) for t in taus]))
    signals = np.stack(parts)
    return _recover_from_signals(pcfg, np.asarray(taus, dtype=float), signals)


def _recover_from_signals(pcfg: ProtocolConfig, taus, signals):
    # reuse ensemble_average's recovery by monkey-free local recomputation
    from .protocol import (
        EnsembleResult,
        _averaged_system,
        _sample_inversions,
        orientation_rotations,
    )

    space = build_space(pcfg.n_phon)
    structure = exciton_structure(assemble(pcfg.params, space))
    rotations = orientation_rotations(pcfg.seed, pcfg.n_orientations, pcfg.fixed_orientation)
    m_all, g_all = _sample_inversions(structure, rotations, pcfg)
    system = _averaged_system(pcfg, m_all, g_all)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((pcfg.seed, 0xB007))))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        kappas = np.array([np.linalg.cond(m) for m in m_all])
    keep = np.nonzero(np.isfinite(kappas) & (kappas < pcfg.sample_kappa_max))[0]
    rhs = signals[:, keep, :] + g_all[np.newaxis, keep, :]
    chis = np.linalg.solve(m_all[np.newaxis, keep], rhs[..., np.newaxis])[..., 0]
    mean = chis.mean(axis=1)
    boots = np.empty((pcfg.bootstrap, len(taus), 4))
    for b in range(pcfg.bootstrap):
        idx = rng.integers(0, len(keep), size=len(keep))
        boots[b] = chis[:, idx, :].mean(axis=1)
    std = boots.std(axis=0, ddof=1) if pcfg.bootstrap > 1 else np.zeros_like(mean)
    residuals = np.array(
        [float(np.linalg.norm(system.m @ mean[it] - (signals[it].mean(axis=0) + system.g)))
         for it in range(len(taus))]
    )
    return EnsembleResult(
        taus=np.asarray(taus, dtype=float), mean=mean, std=std,
        n_samples=pcfg.n_orientations, n_kept=len(keep), seed=pcfg.seed,
        kappa=system.kappa, residuals=residuals, s_mean=signals.mean(axis=1),
    )


def cmd_pump_probe(cfg: dict, args) -> int:
    pcfg = protocol_config(cfg)
    out = resolve_out_dir(cfg, args.out)
    dump_resolved_config(cfg, out)
    space = build_space(cfg["n_phon"])
    structure = exciton_structure(assemble(pcfg.params, space))
    pairs = make_pulse_pairs(
        structure, pcfg.sigma_t, pcfg.eta, args.tau,
        e_pump=pcfg.e_pump, e_probe=pcfg.e_probe, carriers=pcfg.carriers,
    )
    label = (args.pump_sign, args.probe_sign)
    record = simulate_pair(pairs[label], pcfg.params, space)
    write_csv(
        out / "signal_record.csv",
        ["t_fs", "flux_absorption", "flux_emission"],
        zip(record.times, record.flux_absorption, record.flux_emission),
    )
    if args.dump_model:
        ham = assemble(pcfg.params, space)
        evals, _ = ham.eigensystem
        from .core import radfs_to_cm1

        write_csv(
            out / "model_eigs.csv",
            ["index", "energy_cm1", "manifold"],
            [[str(i), radfs_to_cm1(evals[i]), str(int(structure.manifold[i]))] for i in range(space.d)],
        )
    log.info("pair %s integrated signal S = %.9g", label, record.signal)
    return EXIT_OK


def cmd_witness(cfg: dict, args) -> int:
    taus, means = read_chi_curve(Path(args.chi_curve))
    tau_total = args.tau_total if args.tau_total is not None else float(taus[-1])
    out = resolve_out_dir(cfg, args.out)
    dump_resolved_config(cfg, out)

    def interp(t):
        return np.array([np.interp(t, taus, means[:, j]) for j in range(4)])

    theory_curve = None
    if args.with_theory:
        params = params_from_config(cfg)
        space = build_space(cfg["n_phon"])

        def theory(t):
            return theoretical_chi_curve(params, space, [t])[0]

        theory_curve = theory

    rows = []
    for t1 in taus:
        t2 = tau_total - t1
        if t2 <= 0.0 or t2 > taus[-1] or t1 <= 0.0:
            continue
        w = witness_wb(
            ReducedChi.from_vec(t1, interp(t1)),
            ReducedChi.from_vec(t2, interp(t2)),
            ReducedChi.from_vec(tau_total, interp(tau_total)),
        )
        if theory_curve is not None:
            wt = witness_wb(
                ReducedChi.from_vec(t1, theory_curve(t1)),
                ReducedChi.from_vec(t2, theory_curve(t2)),
                ReducedChi.from_vec(tau_total, theory_curve(tau_total)),
            ).value
        else:
            wt = float("nan")
        rows.append([t1, t2, w.value, wt])
    if not rows:
        raise ConfigError("no (T1, T2) pairs with T1, T2 > 0 fit inside the curve")
    write_csv(out / "witness.csv", WITNESS_HEADER, rows)
    return EXIT_OK


def cmd_r_sweep(cfg: dict, args) -> int:
    pcfg = protocol_config(cfg)
    out = resolve_out_dir(cfg, args.out)
    dump_resolved_config(cfg, out)
    j_values = [float(x) for x in args.J]
    points = r_sweep(
        pcfg.params, j_values, window=(args.window[0], args.window[1]),
        cfg=pcfg, n_times=args.n_times,
    )
    write_csv(out / "rsweep.csv", RSWEEP_HEADER, points)
    return EXIT_OK


def _check(name: str, ok: bool, detail: str = "") -> bool:
    log.info("check %-28s %s %s", name, "PASS" if ok else "FAIL", detail)
    return ok


def cmd_validate(cfg: dict, args) -> int:
    params = params_from_config(cfg)
    checks = []

    ham = assemble(params, build_space(min(cfg["n_phon"], 3)))
    u = exact_propagator(ham, 1000.0)
    unit_err = float(np.max(np.abs(u @ u.conj().T - np.eye(ham.space.d))))
    checks.append(_check("unitarity@1000fs", unit_err < 1e-10, f"err={unit_err:.2e}"))

    space = build_space(min(cfg["n_phon"], 3))
    times = np.linspace(0.0, 1000.0, 101)
    curve = theoretical_chi_curve(params, space, times)
    trace_err = float(
        max(
            np.max(np.abs(curve[:, 0] + curve[:, 2] - 1.0)),
            np.max(np.abs(curve[:, 1] + curve[:, 3] - 1.0)),
        )
    )
    in_range = bool(np.all(curve >= -1e-6) and np.all(curve <= 1 + 1e-6))
    checks.append(_check("trace-preservation", trace_err < 1e-6, f"err={trace_err:.2e}"))
    checks.append(_check("chi-range", in_range))

    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(10_000):
        k = rng.uniform(1e-5, 0.05)
        t1, t2 = rng.uniform(1.0, 500.0, size=2)
        w = witness_wb(
            classical_hopping_chi(t1, k), classical_hopping_chi(t2, k),
            classical_hopping_chi(t1 + t2, k),
        )
        worst = max(worst, w.value)
    checks.append(_check("semigroup-zero", worst < 1e-12, f"max={worst:.2e}"))

    sel = apc_preset().replace(J=0.0, g_a=0.0, g_b=0.0).with_dipoles([0, 0, 1.0], [1.0, 0, 0])
    st = exciton_structure(assemble(sel, build_space(0)))
    pairs = polarization_selective_pairs(st, sigma_t=50.0, eta=1e-4, tau=600.0)
    system = build_inversion(pairs, st, pi_model="resonant")
    checks.append(
        _check(
            "polarization-singularity",
            system.det_scale_relative < 1e-12 and system.kappa >= 1e6,
            f"det_rel={system.det_scale_relative:.2e} kappa={system.kappa:.2e}",
        )
    )
    sel2 = sel.replace(delta_E=60.0)
    st2 = exciton_structure(assemble(sel2, build_space(0)))
    pairs2 = polarization_selective_pairs(st2, sigma_t=50.0, eta=1e-4, tau=600.0)
    system2 = build_inversion(pairs2, st2, pi_model="resonant")
    checks.append(
        _check("biexciton-still-singular", system2.det_scale_relative < 1e-12,
               f"det_rel={system2.det_scale_relative:.2e}")
    )

    if not all(checks):
        raise IntegratorError("validation suite failed")
    return EXIT_OK


# --- argument parsing --------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ppwitness",
        description="Pump-probe witnessing of excitonic quantum coherence in a vibronic dimer",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--preset", choices=["apc"], help="parameter preset")
        p.add_argument("--n-phon", type=int, help="phonon truncation per site")
        p.add_argument("--seed", type=int, help="ensemble RNG seed")
        p.add_argument("--threads", type=int, default=1, help="parallel worker cap")
        p.add_argument("--out", help="output directory")
        p.add_argument("--sigma-t", type=float, help="pulse width (fs)")
        p.add_argument("--eta", type=float, help="pulse amplitude")
        p.add_argument("--n-orientations", type=int, help="ensemble size")
        p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("chi-theory", help="exact-dynamics oracle chi curves")
    common(p)
    p.add_argument("--t-max", type=float, default=1000.0)
    p.add_argument("--n-times", type=int, default=101)
    p.set_defaults(func=cmd_chi_theory)

    p = sub.add_parser("pump-probe", help="single pulse-pair TDSE simulation")
    common(p)
    p.add_argument("--tau", type=float, default=400.0)
    p.add_argument("--pump-sign", choices=["+", "-"], default="-")
    p.add_argument("--probe-sign", choices=["+", "-"], default="+")
    p.add_argument("--dump-model", action="store_true")
    p.set_defaults(func=cmd_pump_probe)

    p = sub.add_parser("protocol", help="ensemble witness protocol / chi curve recovery")
    common(p)
    p.add_argument("--T1", type=float, help="interruption delay (fs)")
    p.add_argument("--T2", type=float, help="continuation delay (fs)")
    p.add_argument("--tau-grid", type=float, nargs="+", help="delay grid (fs)")
    p.set_defaults(func=cmd_protocol)

    p = sub.add_parser("witness", help="evaluate W^b from an existing chi_curve.csv")
    common(p)
    p.add_argument("chi_curve", help="path to chi_curve.csv")
    p.add_argument("--tau-total", type=float, help="total delay (default: curve max)")
    p.add_argument("--with-theory", action="store_true",
                   help="add the oracle witness column for the configured dimer")
    p.set_defaults(func=cmd_witness)

    p = sub.add_parser("r-sweep", help="sigma deviation vs coupling ratio r")
    common(p)
    p.add_argument("--J", nargs="+", required=True, help="electronic couplings (cm^-1)")
    p.add_argument("--window", type=float, nargs=2, default=[100.0, 500.0])
    p.add_argument("--n-times", type=int, default=9)
    p.set_defaults(func=cmd_r_sweep)

    p = sub.add_parser("validate", help="run the cross-module invariant suite")
    common(p)
    p.set_defaults(func=cmd_validate)

    return parser


def overrides_from_args(args) -> dict:
    out: dict = {}
    if args.preset:
        out["preset"] = args.preset
    if args.n_phon is not None:
        out["n_phon"] = args.n_phon
    pulse = {}
    if getattr(args, "sigma_t", None) is not None:
        pulse["sigma_t_fs"] = args.sigma_t
    if getattr(args, "eta", None) is not None:
        pulse["eta"] = args.eta
    if pulse:
        out["pulse"] = pulse
    proto = {}
    if args.seed is not None:
        proto["seed"] = args.seed
    if getattr(args, "n_orientations", None) is not None:
        proto["n_orientations"] = args.n_orientations
    if getattr(args, "T1", None) is not None:
        proto["T1_fs"] = args.T1
    if getattr(args, "T2", None) is not None:
        proto["T2_fs"] = args.T2
    if getattr(args, "tau_grid", None):
        proto["tau_grid_fs"] = args.tau_grid
    if proto:
        out["protocol"] = proto
    if args.out:
        out["output_dir"] = args.out
    return out


def error_record(kind: str, exc: Exception) -> None:
    record = {"error": kind, "type": type(exc).__name__, "detail": str(exc)}
    print(json.dumps(record), file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config, overrides_from_args(args))
    except ConfigError as exc:
        error_record("config", exc)
        return EXIT_CONFIG
    try:
        return args.func(cfg, args)
    except ConfigError as exc:
        error_record("config", exc)
        return EXIT_CONFIG
    except (IllConditionedError, IntegratorError, AmbiguityError, ResourceError) as exc:
        error_record("numeric", exc)
        return EXIT_NUMERIC
    except ValueError as exc:
        error_record("numeric", exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
