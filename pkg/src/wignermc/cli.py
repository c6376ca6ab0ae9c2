"""Command-line entry points.

Every command reads one JSON config, writes machine-readable outputs into
an output directory and exits 0 on success; configuration mistakes exit 2,
numerical breakdown 3, failed estimation 4.  A ``manifest.json`` with the
package version, RNG, backend, seed and wall time accompanies every run so
results stay reproducible after the shell history is gone; the numbers
themselves live in separate files the manifest never duplicates.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
import time

import numpy as np

from . import __version__, backend
from ._philox import ALGORITHM
from .backward import estimate_wigner_point, run_backward
from .config import RunConfig, load_config
from .ensemble import run_slices
from .errors import ConfigError, WignerMCError
from .forward import run_forward
from .oracle import TermQuadrature, expansion_term_forward
from .sampling import default_density
from .stencil import build_stencil

_MAX_ORACLE_ORDER = 2


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except WignerMCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wignermc",
        description="Signed-particle transport estimates in linear "
                    "electromagnetic fields",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True,
                       help="JSON run configuration")
        p.add_argument("--output", default=None,
                       help="output directory (default: WIGNERMC_OUTPUT_DIR "
                            "or the working directory)")
        p.add_argument("--seed", type=int, default=None,
                       help="override run.seed")
        p.add_argument("--workers", type=int, default=None,
                       help="thread count for the compiled backend")

    p = sub.add_parser("run-forward",
                       help="forward signed-particle estimate of <A, f(T)>")
    common(p)
    p.add_argument("--trajectories", type=int, default=None,
                   help="override run.trajectories")
    p.set_defaults(handler=_cmd_forward)

    p = sub.add_parser("run-backward",
                       help="backward per-order expansion estimate")
    common(p)
    p.add_argument("--trajectories", type=int, default=None,
                   help="override run.trajectories (per order)")
    p.set_defaults(handler=_cmd_backward)

    p = sub.add_parser("oracle",
                       help="deterministic quadrature of expansion terms")
    common(p)
    p.add_argument("--orders", type=int, default=None,
                   help="highest order to integrate (default: run.max_order, "
                        f"capped at {_MAX_ORACLE_ORDER})")
    p.set_defaults(handler=_cmd_oracle)

    p = sub.add_parser("slice",
                       help="evolve through grid-resampled time slices")
    common(p)
    p.add_argument("--trajectories", type=int, default=None,
                   help="override run.trajectories (per slice)")
    p.set_defaults(handler=_cmd_slice)

    p = sub.add_parser("stencil-dump",
                       help="write the scattering stencil table and rate")
    common(p)
    p.set_defaults(handler=_cmd_stencil_dump)

    return parser


def _output_dir(args) -> str:
    out = args.output or os.environ.get("WIGNERMC_OUTPUT_DIR") or os.getcwd()
    os.makedirs(out, exist_ok=True)
    return out


def _prepare(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        if not (0 <= args.seed < 2 ** 63):
            raise ConfigError("--seed must fit in an unsigned 63-bit integer")
        cfg = dataclasses.replace(cfg, seed=args.seed)
    n_traj = getattr(args, "trajectories", None)
    if n_traj is not None:
        if n_traj < 1:
            raise ConfigError("--trajectories must be at least 1")
        cfg = dataclasses.replace(cfg, trajectories=n_traj)
    if args.workers is not None:
        backend.set_workers(args.workers)
    return cfg, _output_dir(args)


def _write_json(out_dir: str, name: str, payload: dict) -> None:
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(out_dir: str, name: str, header, rows) -> None:
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _write_manifest(out_dir: str, command: str, cfg: RunConfig,
                    args, wall_time: float) -> None:
    _write_json(out_dir, "manifest.json", {
        "command": command,
        "package_version": __version__,
        "rng": ALGORITHM,
        "backend": backend.name(),
        "seed": cfg.seed,
        "workers": args.workers,
        "wall_time_s": wall_time,
        "config": cfg.raw,
    })


def _density(cfg: RunConfig) -> str:
    return cfg.density or default_density(cfg.observable)


def _cmd_forward(args) -> int:
    cfg, out_dir = _prepare(args)
    stencil = build_stencil(cfg.discretization, cfg.fields, cfg.constants)
    t0 = time.perf_counter()
    result = run_forward(
        cfg.initial_state, cfg.observable, cfg.fields, cfg.constants,
        stencil, cfg.final_time, cfg.trajectories, cfg.seed,
        settings=cfg.integrator, density=_density(cfg),
        event_cap=cfg.event_cap,
    )
    wall = time.perf_counter() - t0
    _write_manifest(out_dir, "run-forward", cfg, args, wall)
    _write_json(out_dir, "results.json", {
        "observable": cfg.observable.kind,
        "final_time": cfg.final_time,
        "estimate": result.estimate,
        "stderr": result.stderr,
        "n_requested": result.n_requested,
        "n_used": result.n_used,
        "capped_fraction": result.capped_fraction,
        "cancellation": result.cancellation,
        "mean_events": result.mean_events,
    })
    _write_csv(out_dir, "event_histogram.csv", ("events", "trajectories"),
               list(enumerate(result.event_histogram.tolist())))
    print(f"estimate {result.estimate:.9g} +- {result.stderr:.3g} "
          f"({result.n_used}/{result.n_requested} trajectories)")
    return 0


def _cmd_backward(args) -> int:
    cfg, out_dir = _prepare(args)
    stencil = build_stencil(cfg.discretization, cfg.fields, cfg.constants)
    t0 = time.perf_counter()
    if cfg.point is not None:
        result = estimate_wigner_point(
            cfg.point, cfg.final_time, cfg.initial_state, cfg.fields,
            cfg.constants, stencil, cfg.max_order, cfg.trajectories,
            cfg.seed, settings=cfg.integrator)
        mode = "wigner_point"
        label = f"f({cfg.point.px}, {cfg.point.py}, {cfg.point.x}, " \
                f"{cfg.point.y}; T)"
    else:
        result = run_backward(
            cfg.max_order, cfg.initial_state, cfg.observable, cfg.fields,
            cfg.constants, stencil, cfg.final_time, cfg.trajectories,
            cfg.seed, settings=cfg.integrator, density=_density(cfg))
        mode = "observable"
        label = cfg.observable.kind
    wall = time.perf_counter() - t0
    _write_manifest(out_dir, "run-backward", cfg, args, wall)
    _write_json(out_dir, "results.json", {
        "mode": mode,
        "observable": label,
        "final_time": cfg.final_time,
        "max_order": cfg.max_order,
        "total": result.total,
        "total_stderr": result.total_stderr,
        "terms": [
            {"order": t.order, "estimate": t.estimate, "stderr": t.stderr,
             "n_traj": t.n_traj}
            for t in result.terms
        ],
    })
    _write_csv(out_dir, "terms.csv",
               ("order", "estimate", "stderr", "n_traj"),
               [(t.order, repr(t.estimate), repr(t.stderr), t.n_traj)
                for t in result.terms])
    print(f"total {result.total:.9g} +- {result.total_stderr:.3g} "
          f"through order {cfg.max_order}")
    return 0


def _cmd_oracle(args) -> int:
    cfg, out_dir = _prepare(args)
    orders = args.orders if args.orders is not None \
        else min(cfg.max_order, _MAX_ORACLE_ORDER)
    if not (0 <= orders <= _MAX_ORACLE_ORDER):
        raise ConfigError(
            f"--orders must be in [0, {_MAX_ORACLE_ORDER}]")
    stencil = build_stencil(cfg.discretization, cfg.fields, cfg.constants)
    quad = TermQuadrature(
        steps_per_unit_time=cfg.integrator.step_count_per_unit_time)
    t0 = time.perf_counter()
    terms = [
        expansion_term_forward(n, cfg.initial_state, cfg.observable,
                               cfg.fields, cfg.constants, stencil,
                               cfg.final_time, quad)
        for n in range(orders + 1)
    ]
    wall = time.perf_counter() - t0
    _write_manifest(out_dir, "oracle", cfg, args, wall)
    _write_json(out_dir, "results.json", {
        "observable": cfg.observable.kind,
        "final_time": cfg.final_time,
        "orders": orders,
        "terms": terms,
        "partial_sum": float(np.sum(terms)),
    })
    _write_csv(out_dir, "terms.csv", ("order", "value"),
               [(n, repr(v)) for n, v in enumerate(terms)])
    print(f"partial sum {float(np.sum(terms)):.12g} through order {orders}")
    return 0


def _cmd_slice(args) -> int:
    cfg, out_dir = _prepare(args)
    if cfg.grid_bounds is None or cfg.grid_shape is None:
        raise ConfigError(
            "slice runs need run.grid_bounds and run.grid_shape")
    stencil = build_stencil(cfg.discretization, cfg.fields, cfg.constants)
    t0 = time.perf_counter()
    result = run_slices(
        cfg.initial_state, cfg.fields, cfg.constants, stencil,
        cfg.final_time, cfg.slices, cfg.trajectories, cfg.grid_bounds,
        cfg.grid_shape, cfg.seed, settings=cfg.integrator,
        observables=cfg.observables, event_cap=cfg.event_cap)
    wall = time.perf_counter() - t0
    _write_manifest(out_dir, "slice", cfg, args, wall)
    kinds = [o.kind for o in cfg.observables]
    _write_json(out_dir, "results.json", {
        "observables": kinds,
        "boundaries": result.boundaries.tolist(),
        "slices": [
            {
                "end_time": s.end_time,
                "estimates": s.estimates.tolist(),
                "stderrs": s.stderrs.tolist(),
                "capped_fraction": s.capped_fraction,
                "lost_fraction": s.lost_fraction,
                "grid_total_mass": s.grid_total_mass,
                "grid_abs_mass": s.grid_abs_mass,
            }
            for s in result.stats
        ],
    })
    header = ["end_time"]
    for kind in kinds:
        header += [kind, kind + "_stderr"]
    header += ["capped_fraction", "lost_fraction",
               "grid_total_mass", "grid_abs_mass"]
    rows = []
    for s in result.stats:
        row = [repr(s.end_time)]
        for est, se in zip(s.estimates, s.stderrs):
            row += [repr(float(est)), repr(float(se))]
        row += [repr(s.capped_fraction), repr(s.lost_fraction),
                repr(s.grid_total_mass), repr(s.grid_abs_mass)]
        rows.append(row)
    _write_csv(out_dir, "slice_series.csv", header, rows)
    last = result.stats[-1]
    print(f"{cfg.slices} slices to T={cfg.final_time}: grid mass "
          f"{last.grid_total_mass:.6g}, |mass| {last.grid_abs_mass:.6g}")
    return 0


def _cmd_stencil_dump(args) -> int:
    cfg, out_dir = _prepare(args)
    t0 = time.perf_counter()
    stencil = build_stencil(cfg.discretization, cfg.fields, cfg.constants)
    wall = time.perf_counter() - t0
    _write_manifest(out_dir, "stencil-dump", cfg, args, wall)
    _write_json(out_dir, "stencil.json", {
        "gamma": stencil.gamma,
        "abs_total": stencil.abs_total,
        "delta_p": cfg.discretization.delta_p,
        "delta_x": cfg.discretization.delta_x,
        "term_count": len(stencil.terms),
    })
    probs = stencil.probabilities()
    _write_csv(
        out_dir, "stencil_terms.csv",
        ("index", "di_px", "di_py", "dj_x", "dj_y", "alpha", "probability"),
        [
            (i, t.di[0], t.di[1], t.dj[0], t.dj[1], repr(t.alpha),
             repr(float(probs[i])))
            for i, t in enumerate(stencil.terms)
        ],
    )
    print(f"gamma {stencil.gamma:.12g}, {len(stencil.terms)} stencil terms")
    return 0


if __name__ == "__main__":
    sys.exit(main())
