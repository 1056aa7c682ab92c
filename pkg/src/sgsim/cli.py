"""Batch front-end: parse a run configuration, dispatch, emit CSV/JSON artifacts.

Config format: flat ``key = value`` lines with dotted section keys
(``apparatus.y_b = 5.0``), '#' comments, later keys overriding earlier ones.
Command-line flags override file values.  All numeric output uses 17
significant digits, and every artifact is written atomically (temp file +
rename), so identical config + seed gives byte-identical outputs.

Exit codes: 0 success, 2 parse error, 3 validation error, 4 numeric/domain
failure.  Failures also emit a machine-readable JSON error record on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import dataclass, replace

import numpy as np

from . import analytic, classical, density, experiments, meanfield, oracle
from .core import (
    Apparatus,
    Branch,
    GaussianPacket,
    UnitSystem,
    derive_timing,
    detection_time,
)
from .errors import (
    ConfigError,
    DomainError,
    ExtentError,
    GeometryError,
    InvalidParameterError,
    NoSplitError,
    SgSimError,
)

EXPERIMENTS = (
    "classical",
    "evolve",
    "density",
    "meanfield",
    "oracle-compare",
    "backtrack",
    "recombine",
    "sandwich",
)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_NUMERIC = 4


def _g(x: float) -> str:
    return f"{float(x):.17g}"


@dataclass(frozen=True)
class RunConfig:
    """Everything one batch run needs; round-trips through the text format."""

    experiment: str
    units: UnitSystem = UnitSystem()
    apparatus: Apparatus = Apparatus(0.0, 5.0, 6.0, 26.0, 100.0)
    packet: GaussianPacket = GaussianPacket()
    n: int = 100_000
    seed: int = 42
    bins: int = 40
    t: float | None = None
    grid_n: int = 4096
    n_field_steps: int = 256
    phase_error: float = 0.0
    stage_gap: float = 0.0001
    separated: bool = False
    layers: tuple[tuple[float, float, float], ...] = ((5.0, 6.0, 100.0),)
    out: str = "sgsim-out"

    def __post_init__(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise InvalidParameterError(
                f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}"
            )
        if self.n < 1:
            raise InvalidParameterError(f"n must be >= 1, got {self.n}")
        if self.bins < 2:
            raise InvalidParameterError(f"bins must be >= 2, got {self.bins}")

    def default_time(self) -> float:
        timing = derive_timing(self.apparatus, self.packet, self.units)
        if self.experiment == "oracle-compare":
            return detection_time(self.apparatus, self.packet, self.units)
        return timing.t_c + 5.0


def impulsive_defaults() -> RunConfig:
    """Default oracle-compare setup: short, weak interaction region."""
    return RunConfig(
        experiment="oracle-compare",
        apparatus=Apparatus(0.0, 4.975, 5.025, 10.0, 200.0),
    )


def default_config(experiment: str) -> RunConfig:
    if experiment == "oracle-compare":
        return impulsive_defaults()
    return RunConfig(experiment=experiment)


# ---------------------------------------------------------------------------
# config text format


def parse_config_text(text: str) -> dict[str, str]:
    kv: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        kv[key] = value
    return kv


def _parse_layers(text: str) -> tuple[tuple[float, float, float], ...]:
    if not text.strip():
        return ()
    layers = []
    for item in text.split(";"):
        parts = item.split(":")
        if len(parts) != 3:
            raise ConfigError(f"layer must be 'y0:y1:grad', got {item!r}")
        layers.append(tuple(float(p) for p in parts))
    return tuple(layers)


def _layers_text(layers) -> str:
    return ";".join(f"{_g(a)}:{_g(b)}:{_g(g)}" for a, b, g in layers)


_FLOAT_KEYS = {
    "units.hbar", "units.mass", "units.mu_b",
    "apparatus.y_a", "apparatus.y_b", "apparatus.y_c", "apparatus.y_d",
    "apparatus.grad_Bz",
    "packet.sigma", "packet.k_y", "packet.t_prime",
    "run.t", "recombine.phase_error", "recombine.gap",
}
_INT_KEYS = {"run.n", "run.seed", "run.bins", "grid.n_points", "oracle.n_field_steps"}


def config_from_mapping(kv: dict[str, str], base: RunConfig | None = None) -> RunConfig:
    experiment = kv.get("run.experiment", base.experiment if base else None)
    if experiment is None:
        raise ConfigError("run.experiment is required")
    cfg = base if base is not None and base.experiment == experiment else default_config(experiment)

    def fget(key: str, current: float) -> float:
        if key not in kv:
            return current
        try:
            return float(kv[key])
        except ValueError as exc:
            raise ConfigError(f"{key}: not a number: {kv[key]!r}") from exc

    def iget(key: str, current: int) -> int:
        if key not in kv:
            return current
        try:
            return int(kv[key])
        except ValueError as exc:
            raise ConfigError(f"{key}: not an integer: {kv[key]!r}") from exc

    def cget(key: str, current: complex) -> complex:
        if key not in kv:
            return current
        try:
            return complex(kv[key].replace(" ", ""))
        except ValueError as exc:
            raise ConfigError(f"{key}: not a complex number: {kv[key]!r}") from exc

    unknown = set(kv) - _FLOAT_KEYS - _INT_KEYS - {
        "run.experiment", "run.out", "packet.chi_plus", "packet.chi_minus",
        "sandwich.layers", "recombine.separated", "run.t",
    }
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    units = UnitSystem(
        hbar=fget("units.hbar", cfg.units.hbar),
        mass=fget("units.mass", cfg.units.mass),
        mu_b=fget("units.mu_b", cfg.units.mu_b),
    )
    apparatus = Apparatus(
        y_a=fget("apparatus.y_a", cfg.apparatus.y_a),
        y_b=fget("apparatus.y_b", cfg.apparatus.y_b),
        y_c=fget("apparatus.y_c", cfg.apparatus.y_c),
        y_d=fget("apparatus.y_d", cfg.apparatus.y_d),
        grad_Bz=fget("apparatus.grad_Bz", cfg.apparatus.grad_Bz),
    )
    packet = GaussianPacket(
        sigma=fget("packet.sigma", cfg.packet.sigma),
        k_y=fget("packet.k_y", cfg.packet.k_y),
        chi_plus=cget("packet.chi_plus", cfg.packet.chi_plus),
        chi_minus=cget("packet.chi_minus", cfg.packet.chi_minus),
        t_prime=fget("packet.t_prime", cfg.packet.t_prime),
    )
    t: float | None
    if "run.t" in kv:
        t = float(kv["run.t"])
    else:
        t = cfg.t
    separated = kv.get("recombine.separated", "true" if cfg.separated else "false")
    if separated not in ("true", "false"):
        raise ConfigError("recombine.separated must be 'true' or 'false'")
    return RunConfig(
        experiment=experiment,
        units=units,
        apparatus=apparatus,
        packet=packet,
        n=iget("run.n", cfg.n),
        seed=iget("run.seed", cfg.seed),
        bins=iget("run.bins", cfg.bins),
        t=t,
        grid_n=iget("grid.n_points", cfg.grid_n),
        n_field_steps=iget("oracle.n_field_steps", cfg.n_field_steps),
        phase_error=fget("recombine.phase_error", cfg.phase_error),
        stage_gap=fget("recombine.gap", cfg.stage_gap),
        separated=(separated == "true"),
        layers=_parse_layers(kv["sandwich.layers"]) if "sandwich.layers" in kv else cfg.layers,
        out=kv.get("run.out", cfg.out),
    )


def config_to_text(cfg: RunConfig) -> str:
    def cfmt(c: complex) -> str:
        return f"{c.real:.17g}{c.imag:+.17g}j"

    pairs = [
        ("run.experiment", cfg.experiment),
        ("run.n", str(cfg.n)),
        ("run.seed", str(cfg.seed)),
        ("run.bins", str(cfg.bins)),
        ("run.out", cfg.out),
        ("units.hbar", _g(cfg.units.hbar)),
        ("units.mass", _g(cfg.units.mass)),
        ("units.mu_b", _g(cfg.units.mu_b)),
        ("apparatus.y_a", _g(cfg.apparatus.y_a)),
        ("apparatus.y_b", _g(cfg.apparatus.y_b)),
        ("apparatus.y_c", _g(cfg.apparatus.y_c)),
        ("apparatus.y_d", _g(cfg.apparatus.y_d)),
        ("apparatus.grad_Bz", _g(cfg.apparatus.grad_Bz)),
        ("packet.sigma", _g(cfg.packet.sigma)),
        ("packet.k_y", _g(cfg.packet.k_y)),
        ("packet.chi_plus", cfmt(cfg.packet.chi_plus)),
        ("packet.chi_minus", cfmt(cfg.packet.chi_minus)),
        ("packet.t_prime", _g(cfg.packet.t_prime)),
        ("grid.n_points", str(cfg.grid_n)),
        ("oracle.n_field_steps", str(cfg.n_field_steps)),
        ("recombine.phase_error", _g(cfg.phase_error)),
        ("recombine.gap", _g(cfg.stage_gap)),
        ("recombine.separated", "true" if cfg.separated else "false"),
        ("sandwich.layers", _layers_text(cfg.layers)),
    ]
    if cfg.t is not None:
        pairs.append(("run.t", _g(cfg.t)))
    return "\n".join(f"{k} = {v}" for k, v in pairs) + "\n"


def load_config(path: str, base: RunConfig | None = None) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return config_from_mapping(parse_config_text(text), base)


# ---------------------------------------------------------------------------
# artifact writing


def write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_text(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _csv_text(header: list[str], rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_g(v) for v in row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# experiment runners (each returns a one-line summary)


def _run_classical(cfg: RunConfig, out: str) -> str:
    hist = classical.classical_ensemble(
        cfg.n, cfg.seed, cfg.apparatus, cfg.packet, cfg.bins, cfg.units
    )
    timing = derive_timing(cfg.apparatus, cfg.packet, cfg.units)
    write_atomic(os.path.join(out, "histogram.csv"), hist.to_csv_text())
    write_atomic(os.path.join(out, "histogram.json"), hist.to_json_text())
    write_atomic(
        os.path.join(out, "summary.json"),
        _json_text({"experiment": "classical", "n": cfg.n, "seed": cfg.seed,
                    "z_max": timing.z_max, "v_z": timing.v_z}),
    )
    return f"classical: n={cfg.n} z_max={_g(timing.z_max)} -> {out}/histogram.csv"


def _field_time(cfg: RunConfig) -> float:
    return cfg.t if cfg.t is not None else cfg.default_time()


def _run_evolve(cfg: RunConfig, out: str) -> str:
    t = _field_time(cfg)
    fld = analytic.evolve_packet(cfg.packet, cfg.apparatus, t, cfg.units)
    grid = oracle.suggest_grid(cfg.packet, cfg.apparatus, t, cfg.grid_n, cfg.units)
    z = grid.points
    marginal = fld.z_marginal_density(z)
    write_atomic(
        os.path.join(out, "z_marginal.csv"),
        _csv_text(["z", "density"], zip(z, marginal)),
    )
    y_center = cfg.packet.source_y(cfg.apparatus) + fld.timing.v * fld.tau
    phi_p, phi_m = fld.sample_grid([0.0], [y_center], z)
    rows = zip(
        np.zeros_like(z), np.full_like(z, y_center), z,
        phi_p[0, 0].real, phi_p[0, 0].imag, phi_m[0, 0].real, phi_m[0, 0].imag,
    )
    write_atomic(
        os.path.join(out, "field_line.csv"),
        _csv_text(["x", "y", "z", "re_phi_plus", "im_phi_plus",
                   "re_phi_minus", "im_phi_minus"], rows),
    )
    report = experiments.detect_bimodality(marginal, z)
    write_atomic(
        os.path.join(out, "summary.json"),
        _json_text({
            "experiment": "evolve", "t": t,
            "peak_count": report.peak_count,
            "peak_positions": list(report.peak_positions),
            "expected_centers": [fld.branch_center(b) for b in Branch],
            "width": fld.width,
        }),
    )
    return f"evolve: t={_g(t)} peaks={report.peak_count} -> {out}/z_marginal.csv"


def _run_density(cfg: RunConfig, out: str) -> str:
    t = _field_time(cfg)
    fld = analytic.evolve_packet(cfg.packet, cfg.apparatus, t, cfg.units)
    half = abs(fld.branch_center(Branch.PLUS)) + 6.0 * fld.width
    z_values = np.linspace(-half, half, 1001)
    rows = []
    for variant in ("collapse_free", "collapsed"):
        for mat in density.density_sweep(fld, z_values, variant):
            rows.append((
                mat.z, mat.entries[0, 0].real, mat.entries[1, 1].real,
                mat.entries[0, 1].real, mat.entries[0, 1].imag,
                1.0 if variant == "collapse_free" else 0.0,
            ))
    write_atomic(
        os.path.join(out, "density_sweep.csv"),
        _csv_text(["z", "rho_pp", "rho_mm", "re_rho_pm", "im_rho_pm",
                   "collapse_free"], rows),
    )
    coherence = density.coherence_norm(fld)
    write_atomic(
        os.path.join(out, "summary.json"),
        _json_text({"experiment": "density", "t": t, "coherence_norm": coherence}),
    )
    return f"density: t={_g(t)} coherence={_g(coherence)} -> {out}/density_sweep.csv"


def _run_meanfield(cfg: RunConfig, out: str) -> str:
    t = _field_time(cfg)
    hist = meanfield.meanfield_ensemble(
        cfg.n, cfg.seed, cfg.packet, cfg.apparatus, t, cfg.bins, cfg.units
    )
    write_atomic(os.path.join(out, "histogram.csv"), hist.to_csv_text())
    write_atomic(os.path.join(out, "histogram.json"), hist.to_json_text())
    write_atomic(
        os.path.join(out, "summary.json"),
        _json_text({"experiment": "meanfield", "n": cfg.n, "seed": cfg.seed, "t": t}),
    )
    return f"meanfield: n={cfg.n} t={_g(t)} -> {out}/histogram.csv"


def _run_oracle_compare(cfg: RunConfig, out: str) -> str:
    t = _field_time(cfg)
    grid = oracle.suggest_grid(cfg.packet, cfg.apparatus, t, cfg.grid_n, cfg.units)
    report = oracle.compare_analytic_oracle(
        cfg.packet, cfg.apparatus, t, grid, cfg.units, cfg.n_field_steps
    )
    state = oracle.propagate_packet(
        cfg.packet, cfg.apparatus, grid, t, cfg.units, cfg.n_field_steps
    )
    write_atomic(os.path.join(out, "report.json"), _json_text(report.to_json_dict()))
    rows = zip(grid.points, state.psi_plus.real, state.psi_plus.imag,
               state.psi_minus.real, state.psi_minus.imag)
    write_atomic(
        os.path.join(out, "snapshot.csv"),
        _csv_text(["z", "re_psi_plus", "im_psi_plus", "re_psi_minus",
                   "im_psi_minus"], rows),
    )
    return (
        f"oracle-compare: t={_g(t)} err_plus={_g(report.err_plus)} "
        f"err_minus={_g(report.err_minus)} -> {out}/report.json"
    )


def _run_backtrack(cfg: RunConfig, out: str) -> str:
    report = experiments.backtrack_collapse(cfg.packet, cfg.apparatus, units=cfg.units)
    write_atomic(os.path.join(out, "report.json"), _json_text(report.to_json_dict()))
    return f"backtrack: y_collapse={_g(report.y_collapse)} -> {out}/report.json"


def _reversal_stage(cfg: RunConfig) -> Apparatus:
    a = cfg.apparatus
    gap = cfg.stage_gap * a.dy
    y_b2 = a.y_c + gap
    return Apparatus(
        y_a=a.y_c + 0.5 * gap, y_b=y_b2, y_c=y_b2 + a.dy,
        y_d=y_b2 + a.dy + (a.y_d - a.y_c), grad_Bz=-a.grad_Bz,
    )


def _run_recombine(cfg: RunConfig, out: str) -> str:
    stage2 = None if cfg.separated else _reversal_stage(cfg)
    result = experiments.recombine(
        cfg.packet, cfg.apparatus, stage2, cfg.phase_error, cfg.units
    )
    write_atomic(os.path.join(out, "report.json"), _json_text(result.to_json_dict()))
    return f"recombine: fidelity={_g(result.fidelity)} -> {out}/report.json"


def _run_sandwich(cfg: RunConfig, out: str) -> str:
    stack = experiments.LayerStack(
        tuple(experiments.Layer(*triple) for triple in cfg.layers)
    )
    t = _field_time(cfg)
    result = experiments.sandwich(
        cfg.packet, stack, t, bins=cfg.bins if cfg.bins >= 16 else 128,
        units=cfg.units,
    )
    write_atomic(os.path.join(out, "histogram.csv"), result.histogram.to_csv_text())
    write_atomic(os.path.join(out, "report.json"), _json_text(result.to_json_dict()))
    return f"sandwich: peaks={result.peak_count} -> {out}/report.json"


_RUNNERS = {
    "classical": _run_classical,
    "evolve": _run_evolve,
    "density": _run_density,
    "meanfield": _run_meanfield,
    "oracle-compare": _run_oracle_compare,
    "backtrack": _run_backtrack,
    "recombine": _run_recombine,
    "sandwich": _run_sandwich,
}


def run(config: RunConfig) -> int:
    """Execute one configured experiment; returns the process exit code."""
    try:
        os.makedirs(config.out, exist_ok=True)
        summary = _RUNNERS[config.experiment](config, config.out)
    except ConfigError as exc:
        _emit_error(exc)
        return EXIT_PARSE
    except InvalidParameterError as exc:
        _emit_error(exc)
        return EXIT_VALIDATION
    except (DomainError, ExtentError, NoSplitError, GeometryError) as exc:
        _emit_error(exc)
        return EXIT_NUMERIC
    print(summary)
    return EXIT_OK


def _emit_error(exc: SgSimError) -> None:
    record = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(record, sort_keys=True), file=sys.stderr)


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sgsim",
        description="Collapse-free Stern-Gerlach simulations",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="PATH", default=None)
        p.add_argument("--out", metavar="DIR", default=None)
        p.add_argument("--seed", type=int, metavar="N", default=None)
        p.add_argument("--n", type=int, metavar="N", default=None)
        p.add_argument("--t", type=float, metavar="T", default=None)
        p.add_argument("--bins", type=int, metavar="N", default=None)
        p.add_argument("--grid-n", type=int, metavar="N", default=None)
        if name == "oracle-compare":
            p.add_argument("--n-field-steps", type=int, default=None)
        if name == "recombine":
            p.add_argument("--phase-error", type=float, default=None)
            p.add_argument("--gap", type=float, default=None)
            p.add_argument("--separated", action="store_true", default=False)
        if name == "sandwich":
            p.add_argument("--layers", default=None,
                           help="semicolon-separated y0:y1:grad triples")
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    base = default_config(args.experiment)
    if args.config:
        cfg = load_config(args.config, base)
        if cfg.experiment != args.experiment:
            cfg = replace(cfg, experiment=args.experiment)
    else:
        cfg = base
    updates: dict = {}
    if args.out is not None:
        updates["out"] = args.out
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.n is not None:
        updates["n"] = args.n
    if args.t is not None:
        updates["t"] = args.t
    if args.bins is not None:
        updates["bins"] = args.bins
    if args.grid_n is not None:
        updates["grid_n"] = args.grid_n
    if getattr(args, "n_field_steps", None) is not None:
        updates["n_field_steps"] = args.n_field_steps
    if getattr(args, "phase_error", None) is not None:
        updates["phase_error"] = args.phase_error
    if getattr(args, "gap", None) is not None:
        updates["stage_gap"] = args.gap
    if getattr(args, "separated", False):
        updates["separated"] = True
    if getattr(args, "layers", None) is not None:
        updates["layers"] = _parse_layers(args.layers)
    return replace(cfg, **updates) if updates else cfg


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config_from_args(args)
    except ConfigError as exc:
        _emit_error(exc)
        return EXIT_PARSE
    except InvalidParameterError as exc:
        _emit_error(exc)
        return EXIT_VALIDATION
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
