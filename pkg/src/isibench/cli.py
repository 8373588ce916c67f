"""Command-line front end.

Subcommands run the pipeline stages standalone or end to end:

    model-info   build the model and print dimensions, norms, commutators
    spectrum     diagonalize and write spectrum.csv with degeneracy checks
    equilibrium  eigenstate reductions, time-averaged state, delta
    bounds       evaluate the configured theorem reports
    dynamics     reduced evolution, trajectory.csv, equilibration metric
    sweep        repeat a metric over a model-parameter grid
    run          everything above plus summary.txt

Configs are flat INI-style text with one level of sections; unknown sections
or keys are errors.  Every run derives all randomness from a single root
seed, so identical configs give byte-identical data files (the only
timestamp lives in the summary header).
"""

from __future__ import annotations

import argparse
import configparser
import csv
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np

from .dynamics import Trajectory, evolve_reduced, stratified_times, write_trajectory_csv
from .equilibrium import (EigenstateReductions, eigenstate_reductions, overlaps,
                          time_averaged_state, write_reductions_csv)
from .equilibrium import delta as subspace_delta
from .errors import (CapExceededError, ConfigError, DegenerateSpectrumError,
                     IsibenchError, ValidationError)
from .hilbert import PureState, SpaceLayout, bloch_vector, purity, tensor_product
from .models import (CommutingModelSpec, analytic_eigensystem, build_commuting_model,
                     build_random_model, sample_commuting_spec, sample_cucchietti_spec)
from .sampling import (SubspaceBasis, bath_prefix_basis, full_basis, product_subspace,
                       sample_uniform_state, stream_generators)
from .spectral import (CompositeHamiltonian, SpectralData, check_nondegenerate_gaps,
                       check_nondegenerate_spectrum, eigendecompose, read_matrix)
from .theorems import (THEOREM_IDS, TheoremReport, necessary_condition_lhs,
                       necessary_condition_report, popescu_report,
                       sufficient_condition_report, theorem0_mean_report,
                       theorem0_tail_report, theorem2_lhs, theorem2_reports,
                       write_report)
from .tolerances import DEFAULT, Tolerances

DEFAULT_SEED = 12345
DEFAULT_OUT_DIR = "isibench-out"

_STAGE_MODEL, _STAGE_INITIAL, _STAGE_BOUNDS, _STAGE_DYNAMICS, _STAGE_SWEEP = range(5)

_MODEL_KEYS = {
    "commuting": {"kind", "seed", "dim_bath", "level_splitting", "coupling_scale",
                  "energy_scale"},
    "cucchietti": {"kind", "seed", "n_spins", "level_splitting", "coupling_scale",
                   "field_scale"},
    "random": {"kind", "seed", "dim_system", "dim_bath", "interaction_strength"},
    "file": {"kind", "seed", "path", "dim_system"},
}

# None marks a section validated elsewhere (tolerance overrides check their
# own field names).
_SECTION_KEYS = {
    "model": set().union(*_MODEL_KEYS.values()),
    "initial_state": {"system", "bath"},
    "analysis": {"theorems", "subspace", "dim_restricted", "epsilon", "p",
                 "n_samples", "n_streams", "n_starts", "allow_degenerate"},
    "dynamics": {"enabled", "horizon_over_min_gap", "n_times"},
    "sweep": {"parameter", "values", "draws", "metrics"},
    "tolerances": None,
    "output": {"dir"},
}

_SWEEP_PARAMETERS = {
    "commuting": {"dim_bath", "level_splitting", "coupling_scale", "energy_scale"},
    "cucchietti": {"n_spins", "level_splitting", "coupling_scale", "field_scale"},
    "random": {"dim_system", "dim_bath", "interaction_strength"},
    "file": set(),
}
_INTEGER_PARAMETERS = {"dim_bath", "dim_system", "n_spins"}

_SWEEP_METRICS = ("delta", "mean_squared_polarization", "lhs_i", "necessary_lhs",
                  "equilibration_metric", "min_level_spacing")


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully typed experiment description; picklable for sweep workers."""

    kind: str
    seed: int
    dim_system: int | None
    dim_bath: int
    n_spins: int | None
    level_splitting: float
    coupling_scale: float
    energy_scale: float
    field_scale: float
    interaction_strength: float
    matrix_path: str | None
    initial_system: str
    initial_bath: str
    theorems: tuple[str, ...]
    subspace: str
    dim_restricted: int | None
    epsilon: float
    p: float
    n_samples: int
    n_streams: int
    n_starts: int
    allow_degenerate: bool
    dynamics_enabled: bool
    horizon_over_min_gap: float
    n_times: int
    sweep_parameter: str | None
    sweep_values: tuple[float, ...]
    sweep_draws: int
    sweep_metrics: tuple[str, ...]
    out_dir: str
    tolerances: Tolerances


@dataclass
class ModelBundle:
    kind: str
    layout: SpaceLayout | None
    spectral: SpectralData
    commuting: CommutingModelSpec | None
    hamiltonian: CompositeHamiltonian | None
    source: str


@dataclass
class Pipeline:
    """Shared state of the equilibrium-and-beyond stages."""

    bundle: ModelBundle
    layout: SpaceLayout
    psi: PureState
    phi: PureState
    coeffs: object
    reductions: EigenstateReductions
    subspace: SubspaceBasis
    delta_value: float
    notes: list[str]


def derived_seed(root: int, *path: int) -> int:
    """Deterministic 64-bit child seed for a named pipeline stage."""
    words = np.random.SeedSequence([int(root), *[int(x) for x in path]]).generate_state(2)
    return int(words[0]) | (int(words[1]) << 32)


# ----------------------------------------------------------------- config --

def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_number(text: str):
    stripped = text.strip()
    try:
        return int(stripped)
    except ValueError:
        return float(stripped)


def _parse_name_list(text: str) -> tuple[str, ...]:
    items = tuple(part.strip() for part in text.split(",") if part.strip())
    if not items:
        raise ValueError("empty list")
    return items


def _parse_float_list(text: str) -> tuple[float, ...]:
    return tuple(float(part.strip()) for part in text.split(",") if part.strip())


def bundled_config_names() -> tuple[str, ...]:
    root = resources.files("isibench").joinpath("configs")
    return tuple(sorted(entry.name[:-4] for entry in root.iterdir()
                        if entry.name.endswith(".cfg")))


def _load_raw_config(spec: str) -> tuple[str, str]:
    """Resolve --config to (display name, file text): a path or a bundled name."""
    path = Path(spec)
    if path.is_file():
        return str(path), path.read_text(encoding="utf-8")
    name = spec[:-4] if spec.endswith(".cfg") else spec
    candidate = resources.files("isibench").joinpath("configs", f"{name}.cfg")
    if candidate.is_file():
        return name, candidate.read_text(encoding="utf-8")
    raise ConfigError(
        f"config {spec!r} is neither a file nor a bundled config "
        f"(bundled: {', '.join(bundled_config_names())})"
    )


def _parse_sections(text: str, source: str) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                       inline_comment_prefixes=("#",))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as err:
        raise ConfigError(f"config parse failure: {' '.join(str(err).split())}") from None
    return {section: dict(parser.items(section)) for section in parser.sections()}


def _apply_overrides(raw: dict[str, dict[str, str]], overrides: list[str]) -> None:
    for item in overrides:
        target, sep, value = item.partition("=")
        section, dot, key = target.strip().partition(".")
        if not sep or not dot or not section or not key:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        raw.setdefault(section, {})[key.strip()] = value.strip()


def _take(raw: dict, section: str, key: str, parse, default=None, required=False):
    mapping = raw.get(section, {})
    if key not in mapping:
        if required:
            raise ConfigError(f"missing required key {section}.{key}")
        return default
    text = mapping[key]
    try:
        return parse(text)
    except (ValueError, TypeError) as err:
        raise ConfigError(f"bad value for {section}.{key}: {text!r} ({err})") from None


def _extract_config(raw: dict[str, dict[str, str]], args) -> ExperimentConfig:
    for section in raw:
        if section not in _SECTION_KEYS:
            raise ConfigError(f"unknown config section [{section}]")
    for section, allowed in _SECTION_KEYS.items():
        if allowed is None:
            continue
        for key in raw.get(section, {}):
            if key not in allowed:
                raise ConfigError(f"unknown key {section}.{key}")

    kind = _take(raw, "model", "kind", str.strip, required=True)
    if kind not in _MODEL_KEYS:
        raise ConfigError(f"unknown model kind {kind!r} "
                          f"(choose one of {', '.join(sorted(_MODEL_KEYS))})")
    for key in raw.get("model", {}):
        if key not in _MODEL_KEYS[kind]:
            raise ConfigError(f"key model.{key} is not valid for model kind {kind!r}")

    seed = args.seed if args.seed is not None else _take(raw, "model", "seed", int,
                                                         default=DEFAULT_SEED)

    theorems = _take(raw, "analysis", "theorems", _parse_name_list,
                     default=("SufficientISI", "T2i", "T2ii"))
    for tid in theorems:
        if tid not in THEOREM_IDS:
            raise ConfigError(f"unknown theorem {tid!r} in analysis.theorems "
                              f"(valid: {', '.join(THEOREM_IDS)})")
    if len(set(theorems)) != len(theorems):
        raise ConfigError("analysis.theorems lists a theorem twice")

    subspace = _take(raw, "analysis", "subspace", str.strip, default="product_bath")
    if subspace not in ("full", "product_bath"):
        prefix, sep, arg = subspace.partition(":")
        if prefix != "bath_prefix" or not sep or not arg.isdigit() or int(arg) < 1:
            raise ConfigError(f"bad analysis.subspace {subspace!r} "
                              "(use full, product_bath, or bath_prefix:<dim>)")

    n_samples = _take(raw, "analysis", "n_samples", int, default=400)
    if n_samples < 2:
        raise ConfigError(f"analysis.n_samples must be >= 2, got {n_samples}")
    n_streams = _take(raw, "analysis", "n_streams", int, default=1)
    if n_streams < 1:
        raise ConfigError(f"analysis.n_streams must be >= 1, got {n_streams}")
    n_starts = _take(raw, "analysis", "n_starts", int, default=512)
    if n_starts < 1:
        raise ConfigError(f"analysis.n_starts must be >= 1, got {n_starts}")

    horizon_factor = _take(raw, "dynamics", "horizon_over_min_gap", float,
                           default=1000.0)
    if horizon_factor <= 0:
        raise ConfigError("dynamics.horizon_over_min_gap must be positive")
    n_times = _take(raw, "dynamics", "n_times", int, default=2000)
    if n_times < 1:
        raise ConfigError(f"dynamics.n_times must be >= 1, got {n_times}")

    sweep_parameter = _take(raw, "sweep", "parameter", str.strip)
    sweep_values = _take(raw, "sweep", "values", _parse_float_list, default=())
    sweep_draws = _take(raw, "sweep", "draws", int, default=20)
    sweep_metrics = _take(raw, "sweep", "metrics", _parse_name_list,
                          default=("mean_squared_polarization",))
    if sweep_parameter is not None:
        if sweep_parameter not in _SWEEP_PARAMETERS[kind]:
            valid = ", ".join(sorted(_SWEEP_PARAMETERS[kind])) or "none"
            raise ConfigError(f"sweep.parameter {sweep_parameter!r} is not sweepable "
                              f"for model kind {kind!r} (valid: {valid})")
        if not sweep_values:
            raise ConfigError("sweep.values must list at least one value")
        if len(set(sweep_values)) != len(sweep_values):
            raise ConfigError("sweep.values lists a value twice")
        if sweep_draws < 1:
            raise ConfigError(f"sweep.draws must be >= 1, got {sweep_draws}")
        for metric in sweep_metrics:
            if metric not in _SWEEP_METRICS:
                raise ConfigError(f"unknown sweep metric {metric!r} "
                                  f"(valid: {', '.join(_SWEEP_METRICS)})")
        if sweep_parameter in _INTEGER_PARAMETERS:
            for value in sweep_values:
                if value != int(value) or value < 1:
                    raise ConfigError(f"sweep.values for {sweep_parameter} must be "
                                      f"positive integers, got {value}")

    overrides = raw.get("tolerances", {})
    try:
        tolerances = DEFAULT.replaced(**{key: _parse_number(value)
                                         for key, value in overrides.items()})
    except ValueError as err:
        raise ConfigError(f"bad tolerance override: {err}") from None

    out_dir = args.out if args.out is not None else _take(raw, "output", "dir",
                                                          str.strip,
                                                          default=DEFAULT_OUT_DIR)

    dim_restricted = _take(raw, "analysis", "dim_restricted", int)
    if dim_restricted is not None and dim_restricted < 1:
        raise ConfigError(f"analysis.dim_restricted must be >= 1, got {dim_restricted}")

    config = ExperimentConfig(
        kind=kind,
        seed=seed,
        dim_system=_take(raw, "model", "dim_system", int),
        dim_bath=_take(raw, "model", "dim_bath", int, default=16),
        n_spins=_take(raw, "model", "n_spins", int),
        level_splitting=_take(raw, "model", "level_splitting", float, default=1.0),
        coupling_scale=_take(raw, "model", "coupling_scale", float, default=1.0),
        energy_scale=_take(raw, "model", "energy_scale", float, default=1.0),
        field_scale=_take(raw, "model", "field_scale", float, default=1.0),
        interaction_strength=_take(raw, "model", "interaction_strength", float,
                                   default=1.0),
        matrix_path=_take(raw, "model", "path", str.strip),
        initial_system=_take(raw, "initial_state", "system", str.strip,
                             default="plus"),
        initial_bath=_take(raw, "initial_state", "bath", str.strip, default="random"),
        theorems=tuple(theorems),
        subspace=subspace,
        dim_restricted=dim_restricted,
        epsilon=_take(raw, "analysis", "epsilon", float, default=0.05),
        p=_take(raw, "analysis", "p", float, default=1.0),
        n_samples=n_samples,
        n_streams=n_streams,
        n_starts=n_starts,
        allow_degenerate=_take(raw, "analysis", "allow_degenerate", _parse_bool,
                               default=False),
        dynamics_enabled=_take(raw, "dynamics", "enabled", _parse_bool, default=False),
        horizon_over_min_gap=horizon_factor,
        n_times=n_times,
        sweep_parameter=sweep_parameter,
        sweep_values=tuple(sweep_values),
        sweep_draws=sweep_draws,
        sweep_metrics=tuple(sweep_metrics),
        out_dir=out_dir,
        tolerances=tolerances,
    )
    if kind == "cucchietti" and config.n_spins is None:
        raise ConfigError("model kind cucchietti needs model.n_spins")
    if kind == "file" and config.matrix_path is None:
        raise ConfigError("model kind file needs model.path")
    if config.dim_bath < 1:
        raise ConfigError(f"model.dim_bath must be >= 1, got {config.dim_bath}")
    if config.n_spins is not None and config.n_spins < 1:
        raise ConfigError(f"model.n_spins must be >= 1, got {config.n_spins}")
    if config.dim_system is not None and config.dim_system < 2:
        raise ConfigError(f"model.dim_system must be >= 2, got {config.dim_system}")
    return config


# ------------------------------------------------------------------ build --

def _build_model(config: ExperimentConfig, want_dense: bool = False,
                 model_seed: int | None = None) -> ModelBundle:
    if model_seed is None:
        model_seed = derived_seed(config.seed, _STAGE_MODEL)
    rng = stream_generators(model_seed, 1)[0]
    tol = config.tolerances

    if config.kind in ("commuting", "cucchietti"):
        if config.kind == "commuting":
            spec = sample_commuting_spec(config.dim_bath, config.level_splitting,
                                         config.coupling_scale, config.energy_scale,
                                         rng)
            source = (f"commuting spin-bath (dS=2, dB={spec.dim_bath}, "
                      f"level splitting {config.level_splitting:g})")
        else:
            spec = sample_cucchietti_spec(config.n_spins, config.level_splitting,
                                          config.coupling_scale, config.field_scale,
                                          rng)
            source = (f"independent-spin bath (n_spins={config.n_spins}, dS=2, "
                      f"dB={spec.dim_bath})")
        dim_total = 2 * spec.dim_bath
        if dim_total > tol.decompose_dim_cap:
            raise CapExceededError(f"composite dimension {dim_total} exceeds the cap "
                                   f"{tol.decompose_dim_cap}")
        ham = build_commuting_model(spec, tol) if want_dense else None
        return ModelBundle(config.kind, spec.layout, analytic_eigensystem(spec),
                           spec, ham, source)

    if config.kind == "random":
        ds = config.dim_system if config.dim_system is not None else 2
        ham = build_random_model(ds, config.dim_bath, config.interaction_strength,
                                 rng, tol)
        spectral = eigendecompose(ham, tol)
        source = (f"random Gaussian model (dS={ds}, dB={config.dim_bath}, "
                  f"interaction strength {config.interaction_strength:g})")
        return ModelBundle("random", ham.layout, spectral, None, ham, source)

    matrix, layout = read_matrix(config.matrix_path)
    if layout is None and config.dim_system is not None:
        dim = matrix.shape[0]
        if dim % config.dim_system != 0:
            raise ConfigError(f"matrix dimension {dim} is not divisible by "
                              f"dim_system {config.dim_system}")
        layout = SpaceLayout(config.dim_system, dim // config.dim_system)
    elif layout is not None and config.dim_system is not None \
            and layout.dim_system != config.dim_system:
        raise ConfigError(f"model.dim_system {config.dim_system} contradicts the "
                          f"file's layout tag dS={layout.dim_system}")
    spectral = eigendecompose(matrix, config.tolerances)
    return ModelBundle("file", layout, spectral, None, None,
                       f"matrix file {config.matrix_path} (d={spectral.dim})")


def _require_layout(bundle: ModelBundle) -> SpaceLayout:
    if bundle.layout is None:
        raise ConfigError("the matrix file declares no system/bath split; "
                          "set model.dim_system or tag the file")
    return bundle.layout


def _named_qubit_state(name: str) -> np.ndarray | None:
    s = 1.0 / math.sqrt(2.0)
    table = {"up": (1.0, 0.0), "down": (0.0, 1.0), "plus": (s, s), "minus": (s, -s)}
    if name in table:
        return np.array(table[name], dtype=complex)
    return None


def _factor_state(name: str, dim: int, space: str, seed: int) -> PureState:
    if name == "random":
        rng = stream_generators(seed, 1)[0]
        return sample_uniform_state(full_basis(dim, space), rng)
    if name.startswith("basis:"):
        index_text = name.partition(":")[2]
        if not index_text.isdigit() or int(index_text) >= dim:
            raise ConfigError(f"basis state {name!r} out of range for dimension {dim}")
        vec = np.zeros(dim, dtype=complex)
        vec[int(index_text)] = 1.0
        return PureState(vec, space=space)
    named = _named_qubit_state(name)
    if named is None:
        raise ConfigError(f"unknown initial state {name!r} "
                          "(use up, down, plus, minus, random, or basis:<k>)")
    if dim != 2:
        raise ConfigError(f"initial state {name!r} needs a two-level factor, "
                          f"got dimension {dim}")
    return PureState(named, space=space)


def _analysis_subspace(config: ExperimentConfig, layout: SpaceLayout,
                       psi: PureState) -> SubspaceBasis:
    token = config.subspace
    if token == "full":
        return full_basis(layout.dim_total)
    if token == "product_bath":
        return product_subspace(psi, None, layout)
    prefix_dim = int(token.partition(":")[2])
    if prefix_dim > layout.dim_bath:
        raise ConfigError(f"subspace {token!r} exceeds the bath dimension "
                          f"{layout.dim_bath}")
    return product_subspace(psi, bath_prefix_basis(layout, prefix_dim), layout)


def _prepare_pipeline(config: ExperimentConfig, bundle: ModelBundle | None = None
                      ) -> Pipeline:
    if bundle is None:
        bundle = _build_model(config)
    layout = _require_layout(bundle)
    psi = _factor_state(config.initial_system, layout.dim_system, "system",
                        derived_seed(config.seed, _STAGE_INITIAL, 0))
    phi = _factor_state(config.initial_bath, layout.dim_bath, "bath",
                        derived_seed(config.seed, _STAGE_INITIAL, 1))
    psi0 = tensor_product(psi, phi)
    coeffs = overlaps(bundle.spectral, psi0)
    reductions = eigenstate_reductions(bundle.spectral, layout)
    subspace = _analysis_subspace(config, layout, psi)
    delta_value = subspace_delta(reductions, subspace, bundle.spectral)
    notes = []
    if not check_nondegenerate_spectrum(bundle.spectral, config.tolerances)[0]:
        notes.append("note: spectrum is degenerate; the nondegeneracy hypothesis "
                     "of the equilibrium formulas is violated")
    return Pipeline(bundle=bundle, layout=layout, psi=psi, phi=phi, coeffs=coeffs,
                    reductions=reductions, subspace=subspace,
                    delta_value=delta_value, notes=notes)


# ----------------------------------------------------------------- stages --

def _spectrum_lines(bundle: ModelBundle, tolerances: Tolerances) -> list[str]:
    spectral = bundle.spectral
    spectrum_ok, spacing = check_nondegenerate_spectrum(spectral, tolerances)
    lines = [
        f"dimension: {spectral.dim}",
        f"spectral norm: {spectral.spectral_norm:.6g}",
        f"min level spacing: {spacing:.6g}",
        f"nondegenerate spectrum: {str(spectrum_ok).lower()}",
    ]
    if spectral.dim > tolerances.gap_check_dim_cap:
        lines.append("nondegenerate gaps: skipped (dimension above cap)")
    else:
        gaps_ok, collision = check_nondegenerate_gaps(spectral, tolerances)
        lines.append(f"nondegenerate gaps: {str(gaps_ok).lower()} "
                     f"(min gap collision {collision:.6g})")
    return lines


def _write_spectrum_csv(path: Path, spectral: SpectralData) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write("# schema_version 1\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["n", "energy"])
        for n, energy in enumerate(spectral.eigenvalues):
            writer.writerow([str(n), f"{energy:.17g}"])


def _build_reports(config: ExperimentConfig, pipe: Pipeline
                   ) -> tuple[dict[str, TheoremReport], list[str]]:
    tol = config.tolerances
    spectral = pipe.bundle.spectral
    spectrum_ok = check_nondegenerate_spectrum(spectral, tol)[0]
    reports: dict[str, TheoremReport] = {}
    notes: list[str] = []
    t2_pair: tuple[TheoremReport, TheoremReport] | None = None
    for tid in config.theorems:
        seed_k = derived_seed(config.seed, _STAGE_BOUNDS, THEOREM_IDS.index(tid))
        if tid == "SufficientISI":
            reports[tid] = sufficient_condition_report(pipe.delta_value,
                                                       tolerances=tol)
        elif tid in ("T0i", "T0ii"):
            if not spectrum_ok and config.allow_degenerate:
                notes.append(f"note: {tid} skipped (degenerate spectrum)")
                continue
            if tid == "T0i":
                reports[tid] = theorem0_mean_report(pipe.subspace, spectral,
                                                    pipe.reductions, config.n_samples,
                                                    seed_k, config.n_streams, tol)
            else:
                reports[tid] = theorem0_tail_report(pipe.subspace, spectral,
                                                    pipe.reductions, config.epsilon,
                                                    config.n_samples, seed_k,
                                                    config.n_streams, tol)
        elif tid in ("T1", "T1prime"):
            if tid == "T1":
                dim_restricted = (config.dim_restricted if config.dim_restricted
                                  is not None else pipe.layout.dim_bath)
                p = config.p
            else:
                dim_restricted, p = pipe.layout.dim_bath, 1.0
            reports[tid] = necessary_condition_report(pipe.reductions, config.epsilon,
                                                      dim_restricted, p, tid,
                                                      config.n_starts, seed_k, tol)
        elif tid in ("T2i", "T2ii"):
            if t2_pair is None:
                t2_pair = theorem2_reports(pipe.reductions, config.epsilon,
                                           pipe.layout.dim_bath, 1.0, "asymptotic",
                                           tol)
            reports[tid] = t2_pair[0 if tid == "T2i" else 1]
        elif tid == "Popescu":
            reports[tid] = popescu_report(pipe.layout, config.epsilon,
                                          config.n_samples, seed_k,
                                          config.n_streams, tol)
    return reports, notes


def _report_lines(reports: dict[str, TheoremReport]) -> list[str]:
    lines = ["reports:"]
    for tid, report in reports.items():
        lines.append(f"  {tid}: lhs={report.lhs:.6g} rhs={report.rhs:.6g} "
                     f"verdict={report.verdict}")
    return lines


def _conclusion_line(config: ExperimentConfig, reports: dict[str, TheoremReport]
                     ) -> str:
    report = reports.get("T2ii")
    if report is None:
        return "conclusion: not evaluated (T2ii absent from analysis.theorems)"
    if report.verdict == "violated":
        if abs(report.lhs - 1.0) <= 1e-10:
            accuracy = "≈ 1/3"
        else:
            accuracy = f"≈ {report.lhs / 3.0:.6g}"
        return f"conclusion: system ISI cannot hold with accuracy better than {accuracy}"
    if report.verdict == "vacuous":
        return "conclusion: necessary-condition bound is vacuous at this scale"
    return (f"conclusion: no obstruction to system ISI at accuracy "
            f"{config.epsilon:g}")


def _equilibrium_lines(config: ExperimentConfig, pipe: Pipeline) -> list[str]:
    rho_bar = time_averaged_state(pipe.coeffs, pipe.reductions, pipe.bundle.spectral,
                                  config.tolerances,
                                  allow_degenerate=config.allow_degenerate)
    lines = [
        f"subspace: {config.subspace} (dR={pipe.subspace.dim_subspace})",
        f"delta: {pipe.delta_value:.12g}",
        f"sqrt(delta): {math.sqrt(pipe.delta_value):.12g}",
        f"time-averaged state purity: {purity(rho_bar):.6g}",
    ]
    if pipe.layout.dim_system == 2:
        p = bloch_vector(rho_bar)
        lines.append(f"time-averaged state polarization: "
                     f"({p.px:.6g}, {p.py:.6g}, {p.pz:.6g})")
    return lines


def _run_dynamics(config: ExperimentConfig, pipe: Pipeline
                  ) -> tuple[Trajectory, list[str]]:
    spectral = pipe.bundle.spectral
    if spectral.min_level_spacing <= 0.0:
        raise ValidationError("degenerate spectrum gives no gap timescale for the "
                              "evolution horizon")
    horizon = config.horizon_over_min_gap / spectral.min_level_spacing
    rng = stream_generators(derived_seed(config.seed, _STAGE_DYNAMICS), 1)[0]
    times = stratified_times(horizon, config.n_times, rng)
    trajectory = evolve_reduced(pipe.coeffs, spectral, pipe.layout, times)
    rho_bar = time_averaged_state(pipe.coeffs, pipe.reductions, spectral,
                                  config.tolerances,
                                  allow_degenerate=config.allow_degenerate)
    deviations = np.linalg.eigvalsh(trajectory.states - rho_bar.matrix[None, :, :])
    metric = float(np.abs(deviations).sum(axis=1).mean())
    bound = 2.0 * pipe.layout.dim_system / math.sqrt(pipe.subspace.dim_subspace)
    lines = [
        f"dynamics: horizon={horizon:.6g} n_times={config.n_times}",
        f"mean distance to equilibrium: {metric:.6g}",
        f"equilibration bound 2 dS / sqrt(dR): {bound:.6g}",
    ]
    return trajectory, lines


def _out_dir(config: ExperimentConfig) -> Path:
    path = Path(config.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _emit(lines: list[str]) -> None:
    print("\n".join(lines))


# ------------------------------------------------------------- subcommands --

def _cmd_model_info(config: ExperimentConfig, args, name: str) -> int:
    bundle = _build_model(config, want_dense=True)
    lines = [f"model: {bundle.source}", f"seed: {config.seed}"]
    if bundle.layout is not None:
        lines.append(f"layout: dS={bundle.layout.dim_system} "
                     f"dB={bundle.layout.dim_bath} d={bundle.layout.dim_total}")
    ham = bundle.hamiltonian
    if ham is not None:
        def norm(mat):
            return float(np.abs(np.linalg.eigvalsh(mat)).max())

        lines.append(f"part norms: system={norm(ham.system):.6g} "
                     f"bath={norm(ham.bath):.6g} "
                     f"interaction={norm(ham.interaction):.6g}")
        eye_b = np.eye(bundle.layout.dim_bath)
        eye_s = np.eye(bundle.layout.dim_system)
        lifted_s = np.kron(ham.system, eye_b)
        lifted_b = np.kron(eye_s, ham.bath)
        comm_s = lifted_s @ ham.interaction - ham.interaction @ lifted_s
        comm_b = lifted_b @ ham.interaction - ham.interaction @ lifted_b
        lines.append(f"commutator norms: [HSx1, HSB]={norm(1j * comm_s):.6g} "
                     f"[1xHB, HSB]={norm(1j * comm_b):.6g}")
    if bundle.kind == "random":
        lines.append("ensemble: independent Gaussian Hermitian parts, entry "
                     "variance 1/dim per part")
    lines.extend(_spectrum_lines(bundle, config.tolerances))
    _emit(lines)
    return 0


def _cmd_spectrum(config: ExperimentConfig, args, name: str) -> int:
    bundle = _build_model(config)
    out = _out_dir(config)
    _write_spectrum_csv(out / "spectrum.csv", bundle.spectral)
    lines = _spectrum_lines(bundle, config.tolerances)
    lines.append(f"wrote {out / 'spectrum.csv'}")
    _emit(lines)
    return 0


def _cmd_equilibrium(config: ExperimentConfig, args, name: str) -> int:
    pipe = _prepare_pipeline(config)
    out = _out_dir(config)
    write_reductions_csv(out / "reductions.csv", pipe.bundle.spectral,
                         pipe.reductions)
    lines = _equilibrium_lines(config, pipe)
    lines.extend(pipe.notes)
    lines.append(f"wrote {out / 'reductions.csv'}")
    _emit(lines)
    return 0


def _cmd_bounds(config: ExperimentConfig, args, name: str) -> int:
    pipe = _prepare_pipeline(config)
    reports, notes = _build_reports(config, pipe)
    out = _out_dir(config)
    lines = _report_lines(reports)
    for tid, report in reports.items():
        path = out / f"report_{tid}.json"
        write_report(path, report)
        lines.append(f"wrote {path}")
    lines.extend(notes + pipe.notes)
    lines.append(_conclusion_line(config, reports))
    _emit(lines)
    return 0


def _cmd_dynamics(config: ExperimentConfig, args, name: str) -> int:
    pipe = _prepare_pipeline(config)
    trajectory, lines = _run_dynamics(config, pipe)
    out = _out_dir(config)
    write_trajectory_csv(out / "trajectory.csv", trajectory)
    lines.extend(pipe.notes)
    lines.append(f"wrote {out / 'trajectory.csv'}")
    _emit(lines)
    return 0


def _cmd_run(config: ExperimentConfig, args, name: str) -> int:
    pipe = _prepare_pipeline(config)
    out = _out_dir(config)
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    lines = [
        f"# generated: {stamp}",
        f"config: {name}",
        f"seed: {config.seed}",
        f"model: {pipe.bundle.source}",
        f"initial state: system={config.initial_system} bath={config.initial_bath}",
    ]
    lines.extend(_spectrum_lines(pipe.bundle, config.tolerances))
    _write_spectrum_csv(out / "spectrum.csv", pipe.bundle.spectral)
    write_reductions_csv(out / "reductions.csv", pipe.bundle.spectral,
                         pipe.reductions)
    lines.extend(_equilibrium_lines(config, pipe))
    reports, notes = _build_reports(config, pipe)
    for tid, report in reports.items():
        write_report(out / f"report_{tid}.json", report)
    lines.extend(_report_lines(reports))
    lines.extend(notes)
    if config.dynamics_enabled:
        trajectory, dynamics_lines = _run_dynamics(config, pipe)
        write_trajectory_csv(out / "trajectory.csv", trajectory)
        lines.extend(dynamics_lines)
    lines.extend(pipe.notes)
    lines.append(_conclusion_line(config, reports))
    (out / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _emit(lines + [f"wrote {out / 'summary.txt'}"])
    return 0


# ------------------------------------------------------------------ sweep --

def _with_parameter(config: ExperimentConfig, value: float) -> ExperimentConfig:
    parameter = config.sweep_parameter
    if parameter in _INTEGER_PARAMETERS:
        return replace(config, **{parameter: int(value)})
    return replace(config, **{parameter: float(value)})


def _point_metrics(payload: tuple[ExperimentConfig, int, float]) -> dict:
    config, point_index, value = payload
    varied = _with_parameter(config, value)
    samples: dict[str, list[float]] = {metric: [] for metric in varied.sweep_metrics}
    for draw in range(varied.sweep_draws):
        bundle = _build_model(varied, model_seed=derived_seed(
            varied.seed, _STAGE_SWEEP, point_index, draw, 0))
        layout = _require_layout(bundle)
        psi = _factor_state(varied.initial_system, layout.dim_system, "system",
                            derived_seed(varied.seed, _STAGE_SWEEP, point_index,
                                         draw, 1))
        reductions = eigenstate_reductions(bundle.spectral, layout)
        subspace = _analysis_subspace(varied, layout, psi)
        for metric in varied.sweep_metrics:
            if metric == "delta":
                result = subspace_delta(reductions, subspace, bundle.spectral)
            elif metric == "mean_squared_polarization":
                result = reductions.mean_squared_polarization
            elif metric == "lhs_i":
                result = theorem2_lhs(reductions)[0]
            elif metric == "necessary_lhs":
                result = necessary_condition_lhs(reductions, n_starts=varied.n_starts,
                                                 seed=derived_seed(varied.seed,
                                                                   _STAGE_SWEEP,
                                                                   point_index, draw,
                                                                   2),
                                                 tolerances=varied.tolerances)
            elif metric == "min_level_spacing":
                result = bundle.spectral.min_level_spacing
            else:
                phi = _factor_state(varied.initial_bath, layout.dim_bath, "bath",
                                    derived_seed(varied.seed, _STAGE_SWEEP,
                                                 point_index, draw, 3))
                coeffs = overlaps(bundle.spectral, tensor_product(psi, phi))
                horizon = (varied.horizon_over_min_gap
                           / bundle.spectral.min_level_spacing)
                rng = stream_generators(derived_seed(varied.seed, _STAGE_SWEEP,
                                                     point_index, draw, 4), 1)[0]
                from .dynamics import equilibration_metric
                result = equilibration_metric(coeffs, bundle.spectral, layout,
                                              horizon, varied.n_times, rng,
                                              reductions, varied.tolerances,
                                              varied.allow_degenerate)
            samples[metric].append(float(result))
    row: dict[str, float] = {"value": value, "n_draws": varied.sweep_draws}
    for metric, values in samples.items():
        data = np.asarray(values)
        row[f"{metric}_mean"] = float(data.mean())
        row[f"{metric}_se"] = (float(data.std(ddof=1) / math.sqrt(data.size))
                               if data.size > 1 else 0.0)
    return row


def _cmd_sweep(config: ExperimentConfig, args, name: str) -> int:
    if config.sweep_parameter is None:
        raise ConfigError("sweep needs a [sweep] section with parameter and values")
    values = sorted(config.sweep_values)
    payloads = [(config, index, value) for index, value in enumerate(values)]
    jobs = max(1, args.jobs)
    if jobs == 1 or len(payloads) == 1:
        rows = [_point_metrics(payload) for payload in payloads]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(payloads))) as pool:
            rows = list(pool.map(_point_metrics, payloads))

    out = _out_dir(config)
    columns = ["parameter", "value", "n_draws"]
    for metric in config.sweep_metrics:
        columns.extend([f"{metric}_mean", f"{metric}_se"])
    path = out / "sweep.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write("# schema_version 1\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            record = [config.sweep_parameter, f"{row['value']:.17g}",
                      str(int(row["n_draws"]))]
            for metric in config.sweep_metrics:
                record.append(f"{row[f'{metric}_mean']:.17g}")
                record.append(f"{row[f'{metric}_se']:.17g}")
            writer.writerow(record)

    lines = [f"sweep over {config.sweep_parameter} "
             f"({len(values)} points, {config.sweep_draws} draws each)"]
    for row in rows:
        parts = [f"{config.sweep_parameter}={row['value']:g}"]
        parts.extend(f"{metric}={row[f'{metric}_mean']:.6g}"
                     for metric in config.sweep_metrics)
        lines.append("  " + " ".join(parts))
    lines.append(f"wrote {path}")
    _emit(lines)
    return 0


# ------------------------------------------------------------------- main --

_COMMANDS = {
    "run": _cmd_run,
    "model-info": _cmd_model_info,
    "spectrum": _cmd_spectrum,
    "equilibrium": _cmd_equilibrium,
    "bounds": _cmd_bounds,
    "dynamics": _cmd_dynamics,
    "sweep": _cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isibench",
        description="Equilibration and initial-state-independence testbench for "
                    "system-bath models.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    descriptions = {
        "run": "full pipeline with summary",
        "model-info": "print model dimensions, norms, and commutator checks",
        "spectrum": "diagonalize and run degeneracy checks",
        "equilibrium": "eigenstate reductions and the time-averaged state",
        "bounds": "evaluate the configured theorem reports",
        "dynamics": "reduced evolution and equilibration metric",
        "sweep": "metric over a model-parameter grid",
    }
    for command, description in descriptions.items():
        sub = subparsers.add_parser(command, help=description)
        sub.add_argument("--config", required=True,
                         help="config file path or bundled config name "
                              f"({', '.join(bundled_config_names())})")
        sub.add_argument("--seed", type=int, default=None,
                         help="override the config's root seed")
        sub.add_argument("--jobs", type=int, default=1,
                         help="parallel processes for sweep points")
        sub.add_argument("--out", default=None,
                         help="output directory (default from config, else "
                              f"{DEFAULT_OUT_DIR})")
        sub.add_argument("--override", action="append", default=[],
                         metavar="SECTION.KEY=VALUE",
                         help="override a config entry (repeatable)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        name, text = _load_raw_config(args.config)
        raw = _parse_sections(text, name)
        _apply_overrides(raw, args.override)
        config = _extract_config(raw, args)
        return _COMMANDS[args.command](config, args, name)
    except ConfigError as err:
        print(f"error: {' '.join(str(err).split())}", file=sys.stderr)
        return 2
    except CapExceededError as err:
        print(f"error: {' '.join(str(err).split())}", file=sys.stderr)
        return 3
    except DegenerateSpectrumError as err:
        print(f"error: {' '.join(str(err).split())}", file=sys.stderr)
        return 4
    except IsibenchError as err:
        print(f"error: {' '.join(str(err).split())}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
