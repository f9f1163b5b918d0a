"""Command line entry point: ``neurogeom <kernel|stimulus|lift|group|simulate>``.

Parameters come from built-in defaults, then an optional flat ``key = value``
config file (``--config``), then command line flags; later sources win. The
resolved parameters are written into every output so a run can be repeated
from its outputs alone.

Exit codes: 0 success, 1 numerical failure, 2 input or configuration error.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import io as nio
from .kernel import FPParams, GridSpec, estimate_gamma, smooth, summary, symmetrize
from .lifting import (ContourSpec, FilterBank, arc_through, generate_fhh_stimulus, lift_image,
                      two_unit_scene)
from .meanfield import (MeanFieldParams, NumericalError, check_weak_connectivity, growth_rate,
                        outside_domain_stays_zero, simulate_nonlinear, simulate_reduced,
                        stability_threshold)
from .render import render_kernel_projection, render_matrix, render_spectrum, render_stimulus
from .se2 import AngleMode
from .spectral import ConvergenceError, build_affinity, extract_units, full_spectrum

log = logging.getLogger("neurogeom")

OUTPUT_ENV = "NEUROGEOM_OUTPUT_DIR"

EXIT_OK, EXIT_NUMERIC, EXIT_INPUT = 0, 1, 2


class InputError(ValueError):
    pass


def _bool(v) -> bool:
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


# name -> (type, default, help); one table per command
KERNEL_OPTS = {
    "n_paths": (int, 3000, "number of random paths"),
    "n_steps": (int, 100, "steps per path (H)"),
    "step_ds": (float, 1.0, "arc-length step"),
    "sigma": (float, 0.08, "std of the angular noise"),
    "seed": (int, 0, "random seed"),
    "diffusion_scaling": (_bool, False, "scale angular noise by sqrt(ds) instead of ds"),
    "n_x": (int, 101, "x bins"),
    "n_y": (int, 101, "y bins"),
    "n_theta": (int, 64, "angle bins"),
    "half_range": (float, None, "grid covers [-half_range, half_range]; default H*ds"),
    "bandwidth_x": (float, 1.0, "smoothing bandwidth in bins"),
    "bandwidth_y": (float, 1.0, "smoothing bandwidth in bins"),
    "bandwidth_theta": (float, 1.0, "smoothing bandwidth in bins"),
    "workers": (int, 1, "sampling threads"),
    "output": (str, "kernel.grid", "grid cache file"),
}

STIMULUS_OPTS = {
    "scene": (str, "fhh", "fhh (one contour) or two_unit"),
    "n_total": (int, 150, "total number of elements"),
    "contour": (str, "arc", "arc, line or none"),
    "n_contour": (int, 20, "elements on the contour"),
    "radius": (float, 120.0, "arc radius"),
    "spacing": (float, 3.0, "contour element spacing"),
    "center_x": (float, 0.0, "contour midpoint x"),
    "center_y": (float, 0.0, "contour midpoint y"),
    "direction": (float, 0.0, "contour tangent at its midpoint (radians)"),
    "jitter": (float, 0.0, "std of contour orientation noise"),
    "seed": (int, 0, "random seed"),
    "half_fov": (float, 30.0, "field of view is [-half_fov, half_fov]^2"),
    "min_spacing": (float, 2.5, "minimum distance of background elements"),
    "c": (float, 1.0, "input level"),
    "angle_mode": (str, "full", "full or half"),
    "output": (str, "stimulus.json", "stimulus file"),
}

LIFT_OPTS = {
    "image": (str, None, "input PGM (P5)"),
    "wavelength": (float, 8.0, "Gabor wavelength in pixels"),
    "envelope": (float, 3.0, "Gabor envelope std in pixels"),
    "support": (int, 25, "filter support (odd)"),
    "orientations": (int, 16, "filters in the bank"),
    "threshold": (float, 1.0, "response threshold"),
    "nms_radius": (float, 2.0, "non-maximum suppression radius"),
    "c": (float, 1.0, "input level"),
    "angle_mode": (str, "full", "full (polarity aware) or half"),
    "multi_orientation": (_bool, False, "emit every super-threshold orientation"),
    "output": (str, "lifted.json", "stimulus file"),
}

GROUP_OPTS = {
    "stimulus": (str, "stimulus.json", "stimulus file"),
    "kernel": (str, "kernel.grid", "kernel grid cache"),
    "gamma": (float, 1.0, "transfer slope"),
    "mu": (float, 1.0, "facilitation"),
    "diagonal": (str, "self", "self or zero"),
    "eigen_stop": (float, 0.1, "stop when eigenvalue <= eigen_stop * first"),
    "member_threshold": (float, 0.5, "membership threshold relative to eigenvector max"),
    "max_units": (int, 10, "maximum number of units"),
    "prefix": (str, "group", "output file prefix"),
}

SIMULATE_OPTS = {
    "stimulus": (str, "stimulus.json", "stimulus file"),
    "kernel": (str, "kernel.grid", "kernel grid cache"),
    "alpha": (float, 1.0, "activity decay"),
    "gamma": (float, 1.0, "transfer slope"),
    "c": (float, None, "threshold; default is the stimulus input level"),
    "mu": (float, None, "facilitation; default half the weak-connectivity budget"),
    "mu_sweep": (str, None, "start:stop:count as multiples of the critical mu"),
    "mode": (str, "nonlinear", "nonlinear, reduced or homogeneous"),
    "forcing_form": (str, "linearized_sigmoid", "linearized_sigmoid or paper_eqrem"),
    "initial": (str, "zero", "zero, eigenvector or constant:<value>"),
    "dt": (float, None, "time step; default 0.1/alpha"),
    "t_end": (float, 50.0, "end time"),
    "stride": (int, 1, "keep every stride-th step"),
    "check_outside": (_bool, False, "also run the off-domain check"),
    "prefix": (str, "sim", "output file prefix"),
}

COMMANDS = {
    "kernel": (KERNEL_OPTS, "estimate the connectivity kernel"),
    "stimulus": (STIMULUS_OPTS, "generate a contour-in-noise stimulus"),
    "lift": (LIFT_OPTS, "lift a PGM image to oriented elements"),
    "group": (GROUP_OPTS, "extract perceptual units"),
    "simulate": (SIMULATE_OPTS, "simulate the mean-field equation"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="neurogeom", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (opts, help_) in COMMANDS.items():
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--outdir", help=f"output directory (default ${OUTPUT_ENV} or .)")
        for key, (_, default, h) in opts.items():
            p.add_argument("--" + key.replace("_", "-"), dest=key, default=None,
                           help=f"{h} (default: {default})")
    return parser


def resolve(opts: dict, args: argparse.Namespace) -> dict:
    """Defaults, then config file, then flags."""
    cfg = {k: d for k, (_, d, _) in opts.items()}
    if args.config:
        for k, v in nio.load_config_file(args.config).items():
            if k not in opts:
                raise InputError(f"unknown config key {k!r}")
            cfg[k] = v
    for k in opts:
        v = getattr(args, k)
        if v is not None:
            cfg[k] = v
    out = {}
    for k, v in cfg.items():
        typ = opts[k][0]
        try:
            out[k] = None if v is None else typ(v)
        except ValueError as exc:
            raise InputError(f"bad value for {k}: {v!r}") from exc
    return out


def _outdir(args) -> Path:
    return Path(args.outdir or os.environ.get(OUTPUT_ENV, "."))


def _in_path(outdir: Path, name: str) -> Path:
    p = Path(name)
    if not p.is_absolute() and not p.exists() and (outdir / p).exists():
        return outdir / p
    return p


# -- commands -----------------------------------------------------------------------------


def cmd_kernel(cfg: dict, outdir: Path) -> dict:
    params = FPParams(cfg["sigma"], cfg["step_ds"], cfg["n_steps"], cfg["n_paths"], cfg["seed"],
                      cfg["diffusion_scaling"])
    L = cfg["half_range"] if cfg["half_range"] is not None else params.n_steps * params.step_ds
    spec = GridSpec(cfg["n_x"], cfg["n_y"], cfg["n_theta"], (-L, L), (-L, L))
    gamma = smooth(estimate_gamma(params, spec, cfg["workers"]),
                   (cfg["bandwidth_x"], cfg["bandwidth_y"], cfg["bandwidth_theta"]))
    omega = symmetrize(gamma).normalized()
    out = outdir / cfg["output"]
    config = {k: v for k, v in cfg.items() if k != "workers"}
    nio.write_grid(out, omega, extra={"config": config})
    info = summary(gamma, omega)
    info["anisotropy_ratio"] = nio.finite_or_str(info["anisotropy_ratio"])
    info["config"] = config
    nio.write_json(out.with_suffix(".summary.json"), info)
    nio.write_pnm(out.with_suffix(".xy.pgm"), render_kernel_projection(gamma))
    log.info("kernel written to %s", out)
    return info


def _stimulus_from_cfg(cfg: dict):
    mode = AngleMode.parse(cfg["angle_mode"])
    F = cfg["half_fov"]
    common = dict(jitter=cfg["jitter"], half_fov=F, min_spacing=cfg["min_spacing"],
                  c=cfg["c"], angle_mode=mode)
    if cfg["scene"] == "two_unit":
        stim = two_unit_scene(cfg["seed"], cfg["n_total"], cfg["n_contour"], radius=cfg["radius"],
                              spacing=cfg["spacing"], direction=cfg["direction"], **common)
        return stim, F
    if cfg["scene"] != "fhh":
        raise InputError(f"unknown scene {cfg['scene']!r}")
    midpoint = (cfg["center_x"], cfg["center_y"])
    if cfg["contour"] == "arc":
        contour = arc_through(midpoint, cfg["direction"], cfg["radius"], cfg["n_contour"],
                              cfg["spacing"])
    else:
        contour = ContourSpec(cfg["contour"], cfg["n_contour"], midpoint, cfg["radius"],
                              cfg["spacing"], cfg["direction"])
    stim = generate_fhh_stimulus(cfg["n_total"], contour, cfg["jitter"], cfg["seed"],
                                 field_of_view=(-F, F, -F, F), min_spacing=cfg["min_spacing"],
                                 c=cfg["c"], angle_mode=mode)
    return stim, F


def cmd_stimulus(cfg: dict, outdir: Path) -> dict:
    try:
        stim, F = _stimulus_from_cfg(cfg)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    out = outdir / cfg["output"]
    nio.write_stimulus(out, stim, config=cfg)
    contour = [i for i, lab in enumerate(stim.label_array()) if lab > 0]
    nio.write_pnm(out.with_suffix(".ppm"),
                  render_stimulus(stim, highlight=contour, bounds=(-F - 2, F + 2, -F - 2, F + 2)))
    return {"n_elements": len(stim), "n_contour": len(contour)}


def cmd_lift(cfg: dict, outdir: Path) -> dict:
    if not cfg["image"]:
        raise InputError("--image is required")
    try:
        image = nio.read_pgm(cfg["image"])
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read image {cfg['image']}: {exc}") from exc
    mode = AngleMode.parse(cfg["angle_mode"])
    period = mode.period
    bank = FilterBank.gabor(cfg["wavelength"], cfg["envelope"], cfg["support"],
                            cfg["orientations"], period=period)
    stim = lift_image(image, bank, cfg["threshold"], cfg["c"], nms_radius=cfg["nms_radius"],
                      multi_orientation=cfg["multi_orientation"], angle_mode=mode)
    if len(stim) == 0:
        log.warning("lifting produced no elements (flat image or threshold too high)")
    nio.write_stimulus(outdir / cfg["output"], stim, config=cfg)
    return {"n_elements": len(stim)}


def cmd_group(cfg: dict, outdir: Path) -> dict:
    stim, grid = _load_inputs(cfg, outdir)
    if len(stim) == 0:
        raise InputError("stimulus is empty")
    A = build_affinity(stim, grid, cfg["gamma"], cfg["mu"], cfg["diagonal"])
    units = extract_units(A, cfg["eigen_stop"], cfg["member_threshold"], cfg["max_units"])
    spectrum = full_spectrum(A).eigenvalues
    pre = outdir / cfg["prefix"]
    nio.write_units(f"{pre}_units.json", units, config=cfg)
    nio.write_affinity(f"{pre}_affinity.csv", A, config=cfg)
    nio.write_spectrum(f"{pre}_spectrum.csv", spectrum)
    nio.write_pnm(f"{pre}_spectrum.pgm", render_spectrum(spectrum))
    # rows ordered unit by unit, then the ungrouped rest
    order = [i for u in units for i in sorted(u.member_indices)]
    order += [i for i in range(len(stim)) if i not in set(order)]
    nio.write_pnm(f"{pre}_affinity.pgm", render_matrix(A.entries[np.ix_(order, order)]))
    first = units[0].member_indices if units else ()
    nio.write_pnm(f"{pre}_unit1.ppm", render_stimulus(stim, highlight=first))
    removed: set[int] = set()
    for k, u in enumerate(units, start=1):
        remaining = [i for i in range(len(stim)) if i not in removed]
        sub = stim.permuted(remaining)
        hl = [r for r, i in enumerate(remaining) if i in u.member_indices]
        nio.write_pnm(f"{pre}_iter{k}.ppm", render_stimulus(sub, highlight=hl,
                                                             bounds=_bounds(stim)))
        removed |= u.member_indices
    gap = float(spectrum[0] / spectrum[1]) if len(spectrum) > 1 and spectrum[1] > 0 else None
    return {"n_units": len(units), "unit_sizes": [len(u.member_indices) for u in units],
            "eigen_gap": gap}


def _bounds(stim):
    xy = stim.as_array()[:, :2]
    lo, hi = xy.min(axis=0) - 2, xy.max(axis=0) + 2
    return (lo[0], hi[0], lo[1], hi[1])


def _load_inputs(cfg, outdir):
    try:
        stim = nio.read_stimulus(_in_path(outdir, cfg["stimulus"]))
        grid = nio.read_grid(_in_path(outdir, cfg["kernel"]))
    except (OSError, ValueError, KeyError) as exc:
        raise InputError(f"cannot read inputs: {exc}") from exc
    return stim, grid


def _parse_sweep(text: str) -> np.ndarray:
    try:
        start, stop, count = text.split(":")
        return np.linspace(float(start), float(stop), int(count))
    except ValueError as exc:
        raise InputError(f"bad mu sweep {text!r}; expected start:stop:count") from exc


def cmd_simulate(cfg: dict, outdir: Path) -> dict:
    stim, grid = _load_inputs(cfg, outdir)
    if len(stim) == 0:
        raise InputError("stimulus is empty")
    c = cfg["c"] if cfg["c"] is not None else stim.input_level_c
    base = MeanFieldParams(cfg["alpha"], cfg["gamma"], c, 0.0, cfg["forcing_form"], cfg["dt"],
                           cfg["t_end"])
    A = build_affinity(stim, grid, 1.0, 1.0)
    W = A.kernel_matrix
    if cfg["mu"] is None:
        unit = check_weak_connectivity(W, base.replace(mu=1.0))
        mu = 0.5 * unit.bound / unit.lhs
    else:
        mu = cfg["mu"]
    p = base.replace(mu=mu)
    weak = check_weak_connectivity(W, p)
    stab = stability_threshold(W, p)
    if not weak.passed:
        log.warning("weak connectivity fails (lhs %.4g > bound %.4g); the reduction to the "
                    "stimulated domain is not justified", weak.lhs, weak.bound)
    report = stab.to_dict()
    report["mu_star"] = nio.finite_or_str(report["mu_star"])
    report["weak_connectivity"] = weak.to_dict()
    report["reduction_valid"] = weak.passed

    n = len(stim)
    init = cfg["initial"]
    if init == "zero":
        a0 = np.zeros(n)
    elif init == "eigenvector":
        a0 = full_spectrum(W).pair(0)[1]
    elif init.startswith("constant:"):
        a0 = np.full(n, float(init.split(":", 1)[1]))
    else:
        raise InputError(f"unknown initial state {init!r}")

    mode = cfg["mode"]
    if mode == "nonlinear":
        traj = simulate_nonlinear(W, np.full(n, c), a0, p, cfg["stride"])
    elif mode in ("reduced", "homogeneous"):
        traj = simulate_reduced(W, p, a0, homogeneous=(mode == "homogeneous"), stride=cfg["stride"])
    else:
        raise InputError(f"unknown simulation mode {mode!r}")
    report["max_abs_activity"] = traj.max_abs()

    if cfg["mu_sweep"]:
        v1 = full_spectrum(W).pair(0)[1]
        sweep = []
        for f in _parse_sweep(cfg["mu_sweep"]):
            q = p.replace(mu=f * stab.mu_star)
            run = simulate_reduced(W, q.replace(t_end=min(q.t_end, 20.0 / q.alpha)), v1,
                                   homogeneous=True)
            sweep.append({"mu": q.mu, "stable": bool(q.mu < stab.mu_star),
                          "growth_rate": growth_rate(run, v1),
                          "predicted_rate": -q.alpha + q.mu * q.gamma_slope * stab.lambda_tilde_1})
        report["mu_sweep"] = sweep
    if cfg["check_outside"]:
        report["outside_domain"] = outside_domain_stays_zero(grid, stim, p).to_dict()
    report["config"] = dict(cfg, c=c, mu=mu)
    pre = outdir / cfg["prefix"]
    nio.write_trajectory(f"{pre}_trajectory.csv", traj.times, traj.states)
    nio.write_json(f"{pre}_stability.json", report)
    return report


HANDLERS = {"kernel": cmd_kernel, "stimulus": cmd_stimulus, "lift": cmd_lift,
            "group": cmd_group, "simulate": cmd_simulate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    opts = COMMANDS[args.command][0]
    try:
        cfg = resolve(opts, args)
        HANDLERS[args.command](cfg, _outdir(args))
    except (NumericalError, ConvergenceError, np.linalg.LinAlgError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except (InputError, ValueError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
