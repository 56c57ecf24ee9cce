"""Batch driver: solve and sweep orchestration, reference tables, CSV output.

Subcommands: ``solve``, ``sweep``, ``reference``, ``husimi``, ``momentum``.
Exit codes: 0 success, 1 config validation failure, 2 solver failure.

Every emitted byte is determined by (config, seed, version); wall-clock
timing is therefore written as 0 unless ``timing = true`` is set, trading
reproducibility for provenance explicitly.  The FFT worker count follows the
``ANYONGAS_THREADS`` environment variable (default: all cores).
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import sys
import time
import traceback
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, config_from_mapping, parse_config
from .grid import size_grid, radial_average
from .hartree import (
    OrbitalSet,
    compute_density,
    load_checkpoint,
    power_law_trap,
    save_checkpoint,
)
from .mtf import MtfModel, mtf_constant, reference_table
from .observables import (
    husimi_ll_filling,
    localized_density,
    mc_momentum_profile,
    momentum_density,
    radial_symmetry_fraction,
    rescale_momentum_profile,
)
from .stiefel import SolverParams, initialize_orbitals, lbfgs_minimize

FLOAT_FORMAT = "%.12g"


@dataclasses.dataclass
class RunReport:
    """Self-contained record of one solve: results, provenance, artifacts."""

    alpha: float
    n: int
    s: float
    kinetic_gauge: float
    potential: float
    total: float
    energy_per_n2: float
    mtf_energy_per_n2: float
    iterations: int
    termination: str
    wall_s: float
    grid_points: int
    box_length: float
    radial_symmetry: float
    files: list[str]
    config: dict
    version: str
    config_hash: str

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)


def _config_hash(config: RunConfig) -> str:
    payload = dataclasses.asdict(config)
    payload.pop("out_dir")  # where results land does not change what they are
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def _preamble(config: RunConfig) -> list[str]:
    return [
        f"# anyongas-version: {__version__}",
        f"# config-hash: {_config_hash(config)}",
        f"# seed: {config.seed}",
    ]


def _write_csv(path: Path, preamble: list[str], header: str, rows) -> None:
    lines = list(preamble) + [header]
    for row in rows:
        lines.append(",".join("" if cell is None else
                              (FLOAT_FORMAT % cell if isinstance(cell, float) else str(cell))
                              for cell in row))
    path.write_text("\n".join(lines) + "\n")


def _sub_seed(seed: int, index: int) -> int:
    stream = np.random.SeedSequence(seed).spawn(index + 1)[index]
    return int(stream.generate_state(1, dtype=np.uint64)[0])


def _auto_epsilon(model: MtfModel, box_length: float) -> float:
    # geometric mean of the magnetic length at the center and the cloud
    # radius, clamped so the 5-epsilon window stays inside the box
    magnetic_length = 1.0 / math.sqrt(model.central_field)
    return min(math.sqrt(magnetic_length * model.support_radius), 0.099 * box_length)


def _auto_n_max(alpha: float) -> int:
    return (math.floor(1.0 / alpha) if alpha > 0 else 0) + 2


def run_solve(config: RunConfig, alpha: float | None = None, point_index: int = 0) -> RunReport:
    """One ground-state solve plus the configured observables.

    Files land in ``config.out_dir``: report.json, checkpoint.anyh, a trace
    CSV, and profile CSVs.  Deterministic for fixed (config, seed, version).
    """
    if alpha is None:
        single = config.alphas()
        if len(single) != 1:
            raise ConfigError(["solve expects a single alpha; use sweep for lists"])
        alpha = single[0]
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    grid = size_grid(config.n, alpha, config.s, config.q_x, config.q_p, config.max_grid_points)
    trap = power_law_trap(grid, config.s)
    model = MtfModel(config.n, alpha, config.s)
    ref_width = 0.5 * model.support_radius
    seed = _sub_seed(config.seed, point_index)

    if config.checkpoint_in:
        initial, meta = load_checkpoint(config.checkpoint_in)
        problems = []
        if initial.grid != grid:
            problems.append(
                f"checkpoint grid ({initial.grid.points}, {initial.grid.box_length!r}) "
                f"differs from configured grid ({grid.points}, {grid.box_length!r})"
            )
        if initial.count != config.n:
            problems.append(f"checkpoint holds {initial.count} orbitals, config wants {config.n}")
        if abs(meta["alpha"] - alpha) > 1e-12 or abs(meta["trap_exponent"] - config.s) > 1e-12:
            problems.append("checkpoint (alpha, s) differ from the configured run")
        if problems:
            raise ConfigError(problems)
    else:
        initial = initialize_orbitals(
            grid, trap, config.n, mode=config.init_mode, n_particles=config.n, seed=seed
        )

    params = SolverParams(
        lbfgs_history=config.lbfgs_history,
        gradient_tolerance=config.gradient_tolerance,
        max_iterations=config.max_iterations,
        initialization=config.init_mode,
    )
    checkpoint_path = out_dir / "checkpoint.anyh"

    def checkpoint_callback(iteration: int, orbitals: OrbitalSet, energy) -> None:
        if iteration % config.checkpoint_every == 0:
            save_checkpoint(checkpoint_path, orbitals, alpha, config.s)

    started = time.perf_counter()
    result = lbfgs_minimize(
        initial, trap, alpha, config.n, params, ref_width=ref_width,
        callback=checkpoint_callback,
    )
    wall = time.perf_counter() - started if config.timing else 0.0
    save_checkpoint(checkpoint_path, result.orbitals, alpha, config.s)

    files = ["checkpoint.anyh"]
    preamble = _preamble(config)
    density = compute_density(result.orbitals)

    trace_rows = [
        (i, float(e), float(g))
        for i, (e, g) in enumerate(zip(result.energies, result.gradient_norms))
    ]
    _write_csv(out_dir / "trace.csv", preamble, "iteration,energy,grad_norm", trace_rows)
    files.append("trace.csv")

    if config.radial_profiles:
        radii = np.linspace(0.0, 0.5 * grid.box_length, config.profile_points)
        profile = radial_average(density, radii)
        _write_csv(
            out_dir / "position_density.csv",
            preamble,
            "r_or_p,value,stderr_if_mc",
            [(float(r), float(v), None) for r, v in zip(profile.radii, profile.values)],
        )
        files.append("position_density.csv")

    if config.momentum:
        profile = momentum_density(result.orbitals)
        scaled = rescale_momentum_profile(profile, config.n)
        _write_csv(
            out_dir / "momentum_density.csv",
            preamble,
            "r_or_p,value,stderr_if_mc",
            [(float(p), float(v), None) for p, v in zip(profile.momenta, profile.values)],
        )
        _write_csv(
            out_dir / "momentum_density_rescaled.csv",
            preamble,
            "r_or_p,value,stderr_if_mc",
            [(float(p), float(v), None) for p, v in zip(scaled.momenta, scaled.values)],
        )
        files += ["momentum_density.csv", "momentum_density_rescaled.csv"]

    if config.mc_momentum:
        top = 1.05 * model.momentum_width()
        momenta = np.linspace(0.0, top, config.profile_points)
        profile = mc_momentum_profile(model, momenta, config.mc_samples, _sub_seed(config.seed, 10_000 + point_index))
        _write_csv(
            out_dir / "mc_momentum_density.csv",
            preamble,
            "r_or_p,value,stderr_if_mc",
            [(float(p), float(v), float(e)) for p, v, e in zip(profile.momenta, profile.values, profile.stderr)],
        )
        files.append("mc_momentum_density.csv")

    if config.husimi and alpha > 0:
        epsilon = config.husimi_epsilon or _auto_epsilon(model, grid.box_length)
        n_max = config.husimi_n_max or _auto_n_max(alpha)
        fillings = husimi_ll_filling(
            result.orbitals, epsilon, model.central_field,
            (0.0, 0.0), n_max, normalization=model.central_density,
        )
        _write_csv(
            out_dir / "fillings.csv",
            preamble,
            "alpha,n,m_raw,m_normalized",
            [(float(alpha), f.level, float(f.value), float(f.normalized)) for f in fillings],
        )
        files.append("fillings.csv")

    report = RunReport(
        alpha=float(alpha),
        n=config.n,
        s=float(config.s),
        kinetic_gauge=result.energy.kinetic_gauge,
        potential=result.energy.potential,
        total=result.energy.total,
        energy_per_n2=result.energy.total / config.n**2,
        mtf_energy_per_n2=model.ground_energy / config.n**2,
        iterations=result.iterations,
        termination=result.termination,
        wall_s=wall,
        grid_points=grid.points,
        box_length=grid.box_length,
        radial_symmetry=radial_symmetry_fraction(density),
        files=sorted(files),
        config=dataclasses.asdict(config),
        version=__version__,
        config_hash=_config_hash(config),
    )
    (out_dir / "report.json").write_text(report.to_json() + "\n")
    return report


def run_sweep(config: RunConfig) -> list[RunReport]:
    """Sequential solves over the alpha list plus a summary CSV.

    A failed point is recorded (NaN energies, error.txt in its directory)
    without aborting the remaining points.
    """
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    reports: list[RunReport] = []
    rows = []
    failures = 0
    for index, alpha in enumerate(config.alphas()):
        point_config = dataclasses.replace(config, alpha=alpha, out_dir=str(out_dir / f"alpha_{alpha:.6f}"))
        model = MtfModel(config.n, alpha, config.s)
        try:
            report = run_solve(point_config, alpha=alpha, point_index=index)
            reports.append(report)
            rows.append(
                (
                    float(alpha),
                    report.energy_per_n2,
                    report.mtf_energy_per_n2,
                    report.iterations,
                    report.wall_s,
                )
            )
        except Exception:  # noqa: BLE001 - a failed point must not kill the sweep
            failures += 1
            point_dir = Path(point_config.out_dir)
            point_dir.mkdir(parents=True, exist_ok=True)
            (point_dir / "error.txt").write_text(traceback.format_exc())
            rows.append((float(alpha), float("nan"), model.ground_energy / config.n**2, 0, 0.0))
    _write_csv(
        out_dir / "sweep.csv",
        _preamble(config),
        "alpha,E_over_N2,E_mtf_over_N2,iterations,wall_s",
        rows,
    )
    if failures:
        raise RuntimeError(f"{failures} sweep point(s) failed; see error.txt files under {out_dir}")
    return reports


def emit_reference_tables(alphas, s: float, path: Path, layout: str = "figure") -> None:
    """Closed-form constants and energies over an alpha grid.

    ``figure`` layout carries the constant relative to free fermions and its
    quarter-alpha-squared bound; ``model`` is the plain
    (alpha, c, lambda, E_over_N2) table.
    """
    table = reference_table(alphas, s)
    if layout == "model":
        header = "alpha,c,lambda,E_over_N2"
        rows = [tuple(float(v) for v in row) for row in table]
    elif layout == "figure":
        header = "alpha,c_minus_1,bound_quarter_alpha_sq,lambda,E_over_N2"
        rows = [
            (float(a), float(c - 1.0), float(a * a / 4.0), float(lam), float(energy))
            for a, c, lam, energy in table
        ]
    else:
        raise ConfigError([f"unknown reference layout {layout!r}"])
    _write_csv(path, [f"# anyongas-version: {__version__}"], header, rows)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("config", nargs="?", help="config file (key = value lines)")
    parser.add_argument("--n", type=int)
    parser.add_argument("--alpha", type=str, help="single value or comma list")
    parser.add_argument("--s", type=float)
    parser.add_argument("--q-x", dest="q_x", type=float)
    parser.add_argument("--q-p", dest="q_p", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out-dir", dest="out_dir")
    parser.add_argument("--gradient-tolerance", dest="gradient_tolerance", type=float)
    parser.add_argument("--max-iterations", dest="max_iterations", type=int)
    parser.add_argument("--lbfgs-history", dest="lbfgs_history", type=int)
    parser.add_argument("--init-mode", dest="init_mode", choices=["linear-eigenstates", "randomized"])
    parser.add_argument("--max-grid-points", dest="max_grid_points", type=int)
    parser.add_argument("--radial-profiles", dest="radial_profiles", type=_parse_bool)
    parser.add_argument("--momentum", type=_parse_bool)
    parser.add_argument("--mc-momentum", dest="mc_momentum", type=_parse_bool)
    parser.add_argument("--mc-samples", dest="mc_samples", type=int)
    parser.add_argument("--husimi", type=_parse_bool)
    parser.add_argument("--husimi-epsilon", dest="husimi_epsilon", type=float)
    parser.add_argument("--husimi-n-max", dest="husimi_n_max", type=int)
    parser.add_argument("--profile-points", dest="profile_points", type=int)
    parser.add_argument("--checkpoint-in", dest="checkpoint_in")
    parser.add_argument("--checkpoint-every", dest="checkpoint_every", type=int)
    parser.add_argument("--timing", type=_parse_bool)


def _parse_bool(token: str) -> bool:
    lowered = token.lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {token!r}")


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    mapping: dict = {}
    if args.config:
        text = Path(args.config).read_text()
        config = parse_config(text)
        mapping = dataclasses.asdict(config)
    for key in _FLAG_KEYS:
        value = getattr(args, key, None)
        if value is None:
            continue
        if key == "alpha":
            parts = [p for p in str(value).split(",") if p.strip()]
            parsed = [float(p) for p in parts]
            mapping[key] = parsed[0] if len(parsed) == 1 else parsed
        else:
            mapping[key] = value
    return config_from_mapping(mapping)


_FLAG_KEYS = [
    "n", "alpha", "s", "q_x", "q_p", "seed", "out_dir", "gradient_tolerance",
    "max_iterations", "lbfgs_history", "init_mode", "max_grid_points",
    "radial_profiles", "momentum", "mc_momentum", "mc_samples", "husimi",
    "husimi_epsilon", "husimi_n_max", "profile_points", "checkpoint_in",
    "checkpoint_every", "timing",
]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anyongas",
        description="Mean-field ground states of trapped 2D anyons with "
        "Thomas-Fermi reference theories",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="one ground-state run")
    _add_config_flags(solve)

    sweep = sub.add_parser("sweep", help="runs over an alpha list plus summary CSV")
    _add_config_flags(sweep)

    reference = sub.add_parser("reference", help="closed-form constants table")
    reference.add_argument("--alpha-min", type=float, default=0.0)
    reference.add_argument("--alpha-max", type=float, default=0.999)
    reference.add_argument("--alpha-steps", type=int, default=1000)
    reference.add_argument("--s", type=float, default=2.0)
    reference.add_argument("--layout", choices=["figure", "model"], default="figure")
    reference.add_argument("--out", default="reference.csv")

    husimi = sub.add_parser("husimi", help="Landau-level fillings from a checkpoint")
    husimi.add_argument("--checkpoint", required=True)
    husimi.add_argument("--epsilon", type=float, default=0.0, help="0 = automatic")
    husimi.add_argument("--n-max", dest="n_max", type=int, default=0, help="0 = automatic")
    husimi.add_argument("--out", default="fillings.csv")

    momentum = sub.add_parser("momentum", help="momentum density profile")
    source = momentum.add_mutually_exclusive_group(required=True)
    source.add_argument("--checkpoint", help="grid profile from converged orbitals")
    source.add_argument("--mc", action="store_true", help="semi-classical Monte Carlo profile")
    momentum.add_argument("--n", type=int)
    momentum.add_argument("--alpha", type=float)
    momentum.add_argument("--s", type=float, default=2.0)
    momentum.add_argument("--samples", type=int, default=100_000)
    momentum.add_argument("--seed", type=int, default=0)
    momentum.add_argument("--points", type=int, default=129)
    momentum.add_argument("--rescaled", type=_parse_bool, default=True)
    momentum.add_argument("--out", default="momentum.csv")
    return parser


def _cmd_solve(args) -> int:
    config = _config_from_args(args)
    report = run_solve(config)
    print(
        f"alpha={report.alpha:.4f} E/N^2={report.energy_per_n2:.8f} "
        f"(model {report.mtf_energy_per_n2:.8f}) "
        f"iterations={report.iterations} [{report.termination}]"
    )
    return 0


def _cmd_sweep(args) -> int:
    config = _config_from_args(args)
    reports = run_sweep(config)
    for report in reports:
        print(
            f"alpha={report.alpha:.4f} E/N^2={report.energy_per_n2:.8f} "
            f"(model {report.mtf_energy_per_n2:.8f}) iterations={report.iterations}"
        )
    print(f"sweep CSV: {Path(config.out_dir) / 'sweep.csv'}")
    return 0


def _cmd_reference(args) -> int:
    if not 0.0 <= args.alpha_min < 1.0 or not 0.0 <= args.alpha_max < 1.0:
        raise ConfigError(["alpha grid must lie inside [0, 1)"])
    alphas = np.linspace(args.alpha_min, args.alpha_max, args.alpha_steps)
    emit_reference_tables(alphas, args.s, Path(args.out), layout=args.layout)
    print(f"reference table: {args.out}")
    return 0


def _cmd_husimi(args) -> int:
    orbitals, meta = load_checkpoint(args.checkpoint)
    alpha = meta["alpha"]
    if alpha <= 0:
        raise ConfigError(["checkpoint was run at alpha = 0; no Landau levels to fill"])
    model = MtfModel(orbitals.count, alpha, meta["trap_exponent"])
    epsilon = args.epsilon or _auto_epsilon(model, orbitals.grid.box_length)
    n_max = args.n_max or _auto_n_max(alpha)
    fillings = husimi_ll_filling(
        orbitals, epsilon, model.central_field, (0.0, 0.0), n_max,
        normalization=model.central_density,
    )
    _write_csv(
        Path(args.out),
        [f"# anyongas-version: {__version__}",
         f"# epsilon: {FLOAT_FORMAT % epsilon}",
         f"# field: {FLOAT_FORMAT % model.central_field}",
         f"# completeness: {FLOAT_FORMAT % localized_density(orbitals, epsilon, (0.0, 0.0))}"],
        "alpha,n,m_raw,m_normalized",
        [(float(alpha), f.level, float(f.value), float(f.normalized)) for f in fillings],
    )
    print(f"fillings: {args.out}")
    return 0


def _cmd_momentum(args) -> int:
    if args.checkpoint:
        orbitals, meta = load_checkpoint(args.checkpoint)
        profile = momentum_density(orbitals)
        if args.rescaled:
            profile = rescale_momentum_profile(profile, orbitals.count)
        rows = [(float(p), float(v), None) for p, v in zip(profile.momenta, profile.values)]
    else:
        if args.n is None or args.alpha is None:
            raise ConfigError(["--mc needs --n and --alpha"])
        model = MtfModel(args.n, args.alpha, args.s)
        momenta = np.linspace(0.0, 1.05 * model.momentum_width(), args.points)
        profile = mc_momentum_profile(model, momenta, args.samples, args.seed)
        if args.rescaled:
            profile = rescale_momentum_profile(profile, args.n)
        rows = [
            (float(p), float(v), float(e))
            for p, v, e in zip(profile.momenta, profile.values, profile.stderr)
        ]
    _write_csv(Path(args.out), [f"# anyongas-version: {__version__}"],
               "r_or_p,value,stderr_if_mc", rows)
    print(f"momentum profile: {args.out}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "solve": _cmd_solve,
        "sweep": _cmd_sweep,
        "reference": _cmd_reference,
        "husimi": _cmd_husimi,
        "momentum": _cmd_momentum,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as error:
        for violation in error.violations:
            print(f"config error: {violation}", file=sys.stderr)
        return 1
    except Exception:  # noqa: BLE001 - solver failures exit with code 2
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
