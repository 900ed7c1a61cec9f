"""Refinement studies: convergence tables, sweep data and geometric diagnostics."""
from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .assembly import assemble_matrices
from .analysis import ErrorAccumulator, ErrorRecord, eoc, geometric_diagnostics
from .geometry import LevelSetSurface, ManufacturedProblem
from .mesh import HighOrderMesh, build_mesh
from .timestep import run_simulation, step_count

ConvergenceRow = ErrorRecord

COUPLINGS = ("halve-both", "fix-tau-sweep-h", "fix-h-sweep-tau")
CSV_HEADER = ["level", "dof", "h", "tau", "err_LinfL2", "eoc_LinfL2", "err_L2H1", "eoc_L2H1"]


def level_refinements(dim: int, level: int) -> int:
    """Uniform refinements of the base mesh used at a level.

    Surfaces: the octahedron refined level-1 times (level 1 has h = sqrt 2).
    Curves: the inscribed square refined level+1 times (16 vertices at level 1).
    """
    if level < 1:
        raise ValueError("levels start at 1")
    return level - 1 if dim == 2 else level + 1


def level_mesh(surface: LevelSetSurface, level: int, degree: int) -> HighOrderMesh:
    return build_mesh(surface, level_refinements(surface.dim, level), degree)


def level_tau(tau1: float, level: int) -> float:
    return tau1 * 2.0 ** (1 - level)


def parse_levels(text: str) -> tuple[int, int]:
    """'2..6' -> (2, 6); a single number selects one level."""
    text = str(text).strip()
    if ".." in text:
        a, b = text.split("..", 1)
        lo, hi = int(a), int(b)
    else:
        lo = hi = int(text)
    if lo < 1 or hi < lo:
        raise ValueError(f"bad level range {text!r}")
    return lo, hi


@dataclass
class ExperimentConfig:
    surface: str = "sphere"
    degree: int = 2
    bdf: int = 3
    tau1: float = 0.2
    levels: tuple[int, int] = (1, 6)
    tend: float = 1.0
    coupling: str = "halve-both"
    norm: str = "nodal"
    out: str = "results"
    jobs: int = 1
    # fix-tau-sweep-h: the fixed step; default is a quarter of the finest level's step
    tau_fixed: float | None = None
    # fix-h-sweep-tau: the fixed mesh level; default is the finest level
    level_fixed: int | None = None

    def __post_init__(self):
        if isinstance(self.levels, str):
            self.levels = parse_levels(self.levels)
        self.levels = tuple(int(v) for v in self.levels)
        self.surface = LevelSetSurface.from_name(self.surface).kind.value
        if self.coupling not in COUPLINGS:
            raise ValueError(f"coupling must be one of {COUPLINGS}")
        if self.norm not in ("nodal", "lifted"):
            raise ValueError("norm must be 'nodal' or 'lifted'")
        for level in self.level_range:
            step_count(self.tau_for(level), self.tend)

    @property
    def level_range(self) -> range:
        return range(self.levels[0], self.levels[1] + 1)

    @property
    def fixed_tau(self) -> float:
        if self.tau_fixed is not None:
            return float(self.tau_fixed)
        return level_tau(self.tau1, self.levels[1]) / 4.0

    @property
    def fixed_level(self) -> int:
        return self.levels[1] if self.level_fixed is None else int(self.level_fixed)

    def tau_for(self, level: int) -> float:
        if self.coupling == "fix-tau-sweep-h":
            return self.fixed_tau
        return level_tau(self.tau1, level)

    def mesh_level_for(self, level: int) -> int:
        return self.fixed_level if self.coupling == "fix-h-sweep-tau" else level

    def surface_obj(self) -> LevelSetSurface:
        return LevelSetSurface.from_name(self.surface)

    @classmethod
    def from_text(cls, text: str, **overrides) -> "ExperimentConfig":
        """Parse ``key = value`` lines ('#' starts a comment); overrides win."""
        known = {f.name: f for f in fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"config line {lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in known:
                raise ValueError(f"config line {lineno}: unknown key {key!r}")
            values[key] = value
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**_coerce(values))

    @classmethod
    def from_file(cls, path, **overrides) -> "ExperimentConfig":
        return cls.from_text(Path(path).read_text(), **overrides)


def _coerce(values: dict) -> dict:
    ints = {"degree", "bdf", "jobs", "level_fixed"}
    floats = {"tau1", "tend", "tau_fixed"}
    out = {}
    for key, value in values.items():
        if key in ints and value is not None:
            value = int(value)
        elif key in floats and value is not None:
            value = float(value)
        out[key] = value
    return out


@dataclass
class LevelResult:
    record: ErrorRecord
    final_l2: float
    final_h1: float


def run_level(config: ExperimentConfig, level: int) -> LevelResult:
    surface = config.surface_obj()
    problem = ManufacturedProblem(surface, end_time=config.tend)
    mesh = level_mesh(surface, config.mesh_level_for(level), config.degree)
    h = mesh.mesh_width()
    tau = config.tau_for(level)
    acc = ErrorAccumulator(mesh, problem, config.norm)
    try:
        run_simulation(mesh, problem, config.bdf, tau, config.tend, observer=acc, keep=False)
    except Exception as exc:
        raise RuntimeError(f"level {level} failed: {exc}") from exc
    linf_l2, l2_h1 = acc.result()
    record = ErrorRecord(level, mesh.n_nodes, h, tau, linf_l2, l2_h1)
    return LevelResult(record, *acc.final)


def _run_levels(config: ExperimentConfig, levels) -> list[LevelResult]:
    levels = list(levels)
    if config.jobs > 1 and len(levels) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(run_level, [config] * len(levels), levels))
    else:
        results = [run_level(config, level) for level in levels]
    return sorted(results, key=lambda r: r.record.level)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    levels: list[LevelResult] = field(default_factory=list)

    @property
    def records(self) -> list[ErrorRecord]:
        return [r.record for r in self.levels]

    def _eoc(self, attr: str) -> list[float]:
        values = [getattr(r, attr) for r in self.records]
        if len(values) < 2 or min(values) <= 0.0:
            return []
        return eoc(values)

    @property
    def eoc_LinfL2(self) -> list[float]:
        return self._eoc("err_LinfL2")

    @property
    def eoc_L2H1(self) -> list[float]:
        return self._eoc("err_L2H1")

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        e1 = [""] + [f"{v:.6f}" for v in self.eoc_LinfL2]
        e2 = [""] + [f"{v:.6f}" for v in self.eoc_L2H1]
        for i, r in enumerate(self.records):
            writer.writerow(
                [
                    r.level,
                    r.dof,
                    f"{r.h:.12e}",
                    f"{r.tau:.12e}",
                    f"{r.err_LinfL2:.12e}",
                    e1[i] if i < len(e1) else "",
                    f"{r.err_L2H1:.12e}",
                    e2[i] if i < len(e2) else "",
                ]
            )
        return buf.getvalue()

    def format_table(self) -> str:
        lines = [f"{'level':>5} {'dof':>7} {'h':>10} {'tau':>10} {'LinfL2':>11} {'EOC':>7} {'L2H1':>11} {'EOC':>7}"]
        e1 = [None] + self.eoc_LinfL2
        e2 = [None] + self.eoc_L2H1
        for i, r in enumerate(self.records):
            a = f"{e1[i]:7.4f}" if i < len(e1) and e1[i] is not None else f"{'-':>7}"
            b = f"{e2[i]:7.4f}" if i < len(e2) and e2[i] is not None else f"{'-':>7}"
            lines.append(f"{r.level:5d} {r.dof:7d} {r.h:10.4e} {r.tau:10.4e} {r.err_LinfL2:11.4e} {a} {r.err_L2H1:11.4e} {b}")
        return "\n".join(lines)


def run_experiment(config: ExperimentConfig, write: bool = True) -> ExperimentResult:
    """Run every level of the configured study; optionally write ``table.csv`` to ``config.out``."""
    result = ExperimentResult(config, _run_levels(config, config.level_range))
    if write:
        out = Path(config.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "table.csv").write_text(result.to_csv())
    return result


# ---------------------------------------------------------------------------
# sweeps (plot data of final-time errors)
# ---------------------------------------------------------------------------


@dataclass
class SweepLine:
    """Final-time errors along one line: x is h (space) or tau (time)."""

    label: str
    x: list[float]
    l2: list[float]
    h1: list[float]


def _final_state(config: ExperimentConfig, level: int):
    surface = config.surface_obj()
    problem = ManufacturedProblem(surface, end_time=config.tend)
    mesh = level_mesh(surface, config.mesh_level_for(level), config.degree)
    tau = config.tau_for(level)
    try:
        trajectory = run_simulation(mesh, problem, config.bdf, tau, config.tend, keep=False)
    except Exception as exc:
        raise RuntimeError(f"level {level} failed: {exc}") from exc
    return mesh, tau, trajectory[-1][1]


def _self_convergence_line(config: ExperimentConfig, label: str) -> SweepLine:
    """Temporal differences |alpha_tau(T) - alpha_{tau/2}(T)| on one mesh, in the M(T) and A(T) norms.

    The spatial error cancels, so the slope is the pure time order. The sweep
    runs one level beyond the configured range so each configured tau gets a point.
    """
    lo, hi = config.levels
    states = [_final_state(config, level) for level in range(lo, hi + 2)]
    mesh = states[0][0]
    M, A = assemble_matrices(mesh, config.tend)
    x, l2, h1 = [], [], []
    for (_, tau, a), (_, _, b) in zip(states[:-1], states[1:]):
        d = a - b
        x.append(tau)
        l2.append(float(np.sqrt(max(d @ (M @ d), 0.0))))
        h1.append(float(np.sqrt(max(d @ (A @ d), 0.0))))
    return SweepLine(label, x, l2, h1)


def run_sweep(config: ExperimentConfig, mode: str, fixed=None, reference: str = "exact") -> list[SweepLine]:
    """Space mode: one line per fixed tau over mesh levels. Time mode: one line per fixed mesh level over tau levels.

    ``fixed`` defaults to ``[config.fixed_tau]`` / ``[config.fixed_level]``;
    an empty list yields no lines. Errors are final-time errors against the
    exact solution; ``reference="self"`` (time mode only) measures successive
    differences instead.
    """
    if mode not in ("space", "time"):
        raise ValueError("sweep mode must be 'space' or 'time'")
    if reference not in ("exact", "self") or (reference == "self" and mode != "time"):
        raise ValueError("reference must be 'exact', or 'self' in time mode")
    lines = []
    if mode == "space":
        fixed = [config.fixed_tau] if fixed is None else list(fixed)
        for tau in fixed:
            cfg = replace(config, coupling="fix-tau-sweep-h", tau_fixed=float(tau))
            res = _run_levels(cfg, cfg.level_range)
            lines.append(SweepLine(f"tau{tau:g}", [r.record.h for r in res], [r.final_l2 for r in res], [r.final_h1 for r in res]))
    else:
        fixed = [config.fixed_level] if fixed is None else list(fixed)
        for level in fixed:
            cfg = replace(config, coupling="fix-h-sweep-tau", level_fixed=int(level))
            if reference == "self":
                lines.append(_self_convergence_line(cfg, f"level{int(level)}"))
                continue
            res = _run_levels(cfg, cfg.level_range)
            lines.append(SweepLine(f"level{int(level)}", [r.record.tau for r in res], [r.final_l2 for r in res], [r.final_h1 for r in res]))
    return lines


def fit_slope(x, y, last: int = 3) -> float:
    """Least-squares slope of log y against log x over the last ``last`` points."""
    x = np.log(np.asarray(x, dtype=float)[-last:])
    y = np.log(np.asarray(y, dtype=float)[-last:])
    return float(np.polyfit(x, y, 1)[0])


def emit_convergence_data(lines: list[SweepLine], out_dir, mode: str, slope: float) -> list[Path]:
    """One whitespace-separated file per line (x, L2, H1) plus a reference-slope file."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    column = "h" if mode == "space" else "tau"
    written = []
    for line in lines:
        path = out / f"{mode}_{line.label}.dat"
        rows = [f"# {column} err_L2 err_H1"]
        rows += [f"{x:.12e} {a:.12e} {b:.12e}" for x, a, b in zip(line.x, line.l2, line.h1)]
        path.write_text("\n".join(rows) + "\n")
        written.append(path)
    ref = out / f"{mode}_reference.dat"
    rows = [f"# {column} reference_slope_{slope:g}"]
    if lines and lines[0].x:
        x0, y0 = lines[0].x[-1], lines[0].l2[-1]
        rows += [f"{x:.12e} {y0 * (x / x0) ** slope:.12e}" for x in lines[0].x]
    ref.write_text("\n".join(rows) + "\n" if len(rows) > 1 else "")
    written.append(ref)
    return written


# ---------------------------------------------------------------------------
# geometric diagnostics table
# ---------------------------------------------------------------------------


def diagnose(config: ExperimentConfig, t: float = 0.0) -> list[dict]:
    """Max lift distance and area error per level, with EOCs."""
    surface = config.surface_obj()
    rows = []
    for level in config.level_range:
        mesh = level_mesh(surface, level, config.degree)
        dist, area = geometric_diagnostics(mesh, t)
        rows.append({"level": level, "dof": mesh.n_nodes, "h": mesh.mesh_width(), "max_distance": dist, "area_error": area})
    for key in ("max_distance", "area_error"):
        values = [r[key] for r in rows]
        rates = eoc(values) if len(values) > 1 and all(v is not None and v > 0 for v in values) else []
        for i, r in enumerate(rows):
            r[f"eoc_{key}"] = rates[i - 1] if i > 0 and rates else None
    return rows


def diagnostics_csv(rows: list[dict]) -> str:
    keys = ["level", "dof", "h", "max_distance", "eoc_max_distance", "area_error", "eoc_area_error"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(keys)
    for r in rows:
        writer.writerow(["" if r[k] is None else (f"{r[k]:.12e}" if isinstance(r[k], float) else r[k]) for k in keys])
    return buf.getvalue()


def config_dict(config: ExperimentConfig) -> dict:
    d = asdict(config)
    d["levels"] = f"{config.levels[0]}..{config.levels[1]}"
    return d


def model_order(config: ExperimentConfig, mode: str) -> int:
    return config.degree + 1 if mode == "space" else config.bdf


__all__ = [
    "COUPLINGS",
    "CSV_HEADER",
    "ExperimentConfig",
    "ExperimentResult",
    "LevelResult",
    "SweepLine",
    "diagnose",
    "diagnostics_csv",
    "emit_convergence_data",
    "fit_slope",
    "level_mesh",
    "level_refinements",
    "level_tau",
    "model_order",
    "parse_levels",
    "run_experiment",
    "run_level",
    "run_sweep",
]
