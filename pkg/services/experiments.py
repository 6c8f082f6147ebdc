"""
Experiment orchestration service.

This module handles the logic for:
- Barenblatt and correction-ODE tables
- Full simulations: log-spaced sampling, Eulerian snapshots, energy series
  and the final exponent/boundedness reports
- Grid refinement studies with Richardson observed orders
- Parameter sweeps with per-cell error isolation and deterministic ordering
- Standalone Hardy-ratio studies and re-fits of stored series

Every file a run writes is stamped with the config hash.
"""

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from config import settings
from errors import CflUnderflow, ConfigError, MapDegenerate, PatternNotFound, VacuumLabError
from models.config import RunConfig
from models.parameters import GasParameters
from models.reports import (
    DIFFERENCED_NORMS,
    REFINEMENT_SENSITIVE_NORMS,
    ConvergenceRow,
    EnergyDecayReport,
    HardyResult,
    RateFit,
    RateReport,
    RefinementReport,
    RunOutcome,
    SweepRow,
)
from models.state import AnsatzEvaluation, EulerianSnapshot, Grid, RunSeries, SolverState
from services.barenblatt import (
    barenblatt_boundary,
    barenblatt_density_clamped,
    barenblatt_mass,
    barenblatt_velocity,
    derive_profile,
)
from services.correction import (
    CorrectionTrajectory,
    eta_bar_x,
    integrate_correction,
    phase_plane_check,
    sample_ansatz,
    verify_decay_rates,
)
from services.metrics import AccelerationHistory, energy_report, hardy_ratio, sup_norm_names, time_derivatives
from services.rates import energy_decay_report, fit_power_law, rate_report
from services.solver import build_grid, initial_data, reconstruct_eulerian, rhs_acceleration, stable_dt, step
from utils.storage import ensure_directory, read_csv, write_csv, write_json

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ["t", "E0", "E1", "E2", "sup_w", "sup_wt", "x_minus", "x_plus", "mass", "eta_x_min", "dt"]
SNAPSHOT_COLUMNS = ["x", "w", "w_t", "rho", "u", "rho_bar", "u_bar", "rho_diff", "u_diff"]
BOUNDARY_ORDERS = (1, 2, 3)


# ============== Schedules ==============

def sample_schedule(t_end: float, samples_per_decade: int, extra: Iterable[float] = ()) -> np.ndarray:
    """
    Sample times log-spaced in 1+t from 0 to t_end, merged with extra times.

    Times closer than 1e-12 (1+t) to an earlier one are dropped.
    """
    decades = math.log10(1.0 + t_end)
    n = max(int(math.ceil(decades * samples_per_decade)) + 1, 2)
    times = np.logspace(0.0, decades, n) - 1.0
    times[0], times[-1] = 0.0, t_end
    merged = np.sort(np.concatenate([times, [t for t in extra if 0.0 <= t <= t_end]]))

    kept = [merged[0]]
    for t in merged[1:]:
        if t - kept[-1] > 1e-12 * (1.0 + t):
            kept.append(t)
    return np.array(kept)


def _snapshot_label(t: float) -> str:
    return f"{t:.6g}".replace("+", "")


# ============== Simulation ==============

@dataclass
class SimulationResult:
    """Everything a simulation produced, before it is written to disk."""

    config: RunConfig
    params: GasParameters
    grid: Grid
    outcome: RunOutcome
    series: RunSeries
    final_state: SolverState
    snapshots: Dict[float, Tuple[SolverState, EulerianSnapshot]] = field(default_factory=dict)
    mixed_energies: Dict[str, np.ndarray] = field(default_factory=dict)
    rate_report: Optional[RateReport] = None
    energy_decay: Optional[EnergyDecayReport] = None
    analysis_note: str = ""


class Simulation:
    """
    One run of the vacuum solver on a fixed grid.

    Handles:
    - Stepping to each scheduled time without overshooting it
    - The acceleration history used for third time derivatives
    - Per-sample energy and rate bookkeeping
    """

    def __init__(
        self,
        config: RunConfig,
        trajectory: Optional[CorrectionTrajectory] = None,
        n_cells: Optional[int] = None,
        t_end: Optional[float] = None,
    ):
        self.config = config
        self.params = config.gas_parameters()
        self.profile = derive_profile(self.params, config.params.mass)
        self.grid = build_grid(self.profile, self.params, n_cells or config.grid.n_cells)
        self.t_end = t_end if t_end is not None else config.run.t_end
        self.cfl = config.grid.cfl
        self.trajectory = trajectory or correction_trajectory(config, self.params, self.t_end)
        self.history: Optional[AccelerationHistory] = AccelerationHistory() if config.metrics.use_j3_fd else None
        self._rows: List[Dict[str, Any]] = []
        self.snapshots: Dict[float, Tuple[SolverState, EulerianSnapshot]] = {}

    def _rhs_ansatz(self, t: float) -> AnsatzEvaluation:
        return AnsatzEvaluation(t=t, eta_tilde_x=float(self.trajectory.eta_x(t)), derivatives=())

    def _push_history(self, state: SolverState) -> None:
        if self.history is not None:
            self.history.push(state.t, rhs_acceleration(state, self.grid, self.params, self._rhs_ansatz(state.t)))

    def initial_state(self) -> SolverState:
        state = initial_data(self.grid, self.config.run.preset, self.config.run.amplitude)
        self._push_history(state)
        return state

    def advance_to(self, state: SolverState, target: float) -> SolverState:
        """Step until state.t reaches target; the last two steps split the remainder evenly."""
        while True:
            remaining = target - state.t
            if remaining <= 1e-12 * (1.0 + target):
                return state
            dt_stable = stable_dt(state, self.grid, self.params, float(self.trajectory.eta_x(state.t)), self.cfl)
            if remaining <= dt_stable:
                max_dt = remaining
            elif remaining < 2.0 * dt_stable:
                max_dt = 0.5 * remaining
            else:
                max_dt = None
            state = step(state, self.grid, self.params, self.trajectory, self.cfl, max_dt=max_dt)
            self._push_history(state)

    def _record(self, state: SolverState) -> None:
        t = state.t
        ansatz = self.trajectory.ansatz(t, k_max=3)
        snapshot = reconstruct_eulerian(state, self.grid, self.params, self.trajectory)
        report = energy_report(state, self.grid, self.params, ansatz, snapshot, self.config.metrics, self.history)

        have_j3 = self.history is not None and len(self.history) >= 3
        derivs = time_derivatives(
            state, self.grid, self.params, ansatz, 3 if have_j3 else 2, self.history if have_j3 else None
        )
        bar_x = float(eta_bar_x(self.params, t))

        row: Dict[str, Any] = {
            "t": t,
            "sup_w": float(np.max(np.abs(state.w))),
            "sup_wt": float(np.max(np.abs(state.w_t))),
            "x_minus": report.x_minus,
            "x_plus": report.x_plus,
            "mass": report.mass,
            "eta_x_min": report.eta_x_min,
            "dt": state.dt_current,
            "density_ratio_sup": float(np.max(np.abs(1.0 / snapshot.eta_x - 1.0 / bar_x))),
            "velocity_diff_sup": float(np.max(np.abs(snapshot.velocity_diff))),
            "total_energy": report.total_energy,
            "sup_total": report.sup_total,
        }
        for j in range(3):
            row[f"E{j}"] = report.E.get(j, math.nan)
        for key, value in report.E_mixed.items():
            row[f"E{key.replace(',', '_')}"] = value
        for name in sup_norm_names(range(4)):
            row[f"sup_{name}"] = report.sup_norms.get(name, math.nan)
        for j in range(4):
            row[f"unweighted_dt{j}_w"] = float(np.max(np.abs(derivs[j]))) if j < len(derivs) else math.nan
        for k in BOUNDARY_ORDERS:
            w_k = float(derivs[k][-1]) if k < len(derivs) else math.nan
            row[f"d{k}_x_plus"] = self.grid.L * ansatz.derivative(k) + w_k
        self._rows.append(row)

        if any(abs(t - s) <= 1e-12 * (1.0 + s) for s in self.config.run.snapshot_times):
            self.snapshots[t] = (state, snapshot)

    def _series(self) -> Tuple[RunSeries, Dict[str, np.ndarray]]:
        def column(name: str) -> np.ndarray:
            return np.array([row.get(name, math.nan) for row in self._rows], dtype=float)

        mixed_keys = sorted({key for row in self._rows for key in row if key.startswith("E") and "_" in key})
        return RunSeries(
            t=column("t"),
            x_minus=column("x_minus"),
            x_plus=column("x_plus"),
            mass=column("mass"),
            eta_x_min=column("eta_x_min"),
            dt=column("dt"),
            density_ratio_sup=column("density_ratio_sup"),
            velocity_diff_sup=column("velocity_diff_sup"),
            total_energy=column("total_energy"),
            sup_total=column("sup_total"),
            boundary_derivatives={k: column(f"d{k}_x_plus") for k in BOUNDARY_ORDERS},
            energies={j: column(f"E{j}") for j in range(self.config.metrics.j_max + 1)},
            sup_norms={name: column(f"sup_{name}") for name in sup_norm_names(range(4))},
            unweighted_sup={j: column(f"unweighted_dt{j}_w") for j in range(4)},
        ), {key: column(key) for key in mixed_keys}

    def run(self, schedule: Optional[np.ndarray] = None) -> SimulationResult:
        """
        Run to t_end, recording every scheduled time.

        MapDegenerate and CflUnderflow end the run early; the outcome records
        when and why, and the series keeps every sample taken before.
        """
        run_cfg = self.config.run
        if schedule is None:
            schedule = sample_schedule(self.t_end, run_cfg.samples_per_decade, run_cfg.snapshot_times)

        state = initial_data(self.grid, run_cfg.preset, run_cfg.amplitude)
        logger.info(
            f"Simulating {run_cfg.preset} (eps={run_cfg.amplitude}) on {self.grid.n_cells} cells "
            f"to t={self.t_end:g}, regime {self.params.regime}"
        )
        try:
            self._push_history(state)
            self._record(state)
            for target in schedule[1:]:
                state = self.advance_to(state, float(target))
                self._record(state)
        except MapDegenerate as e:
            logger.warning(f"Run terminated: {e}")
            outcome = RunOutcome(
                completed=False,
                t_final=state.t,
                steps=state.step_count,
                degenerate=True,
                degenerate_at=e.t,
                eta_x_min=e.eta_x_min,
                message=str(e),
                exit_code=e.exit_code,
            )
        except CflUnderflow as e:
            logger.warning(f"Run terminated: {e}")
            outcome = RunOutcome(
                completed=False, t_final=state.t, steps=state.step_count, message=str(e), exit_code=e.exit_code
            )
        else:
            outcome = RunOutcome(completed=True, t_final=state.t, steps=state.step_count)
            logger.info(f"Run completed at t={state.t:g} after {state.step_count} steps")

        series, mixed = self._series()
        result = SimulationResult(
            config=self.config,
            params=self.params,
            grid=self.grid,
            outcome=outcome,
            series=series,
            final_state=state,
            snapshots=dict(self.snapshots),
            mixed_energies=mixed,
        )
        return result


def correction_trajectory(config: RunConfig, params: GasParameters, t_end: float) -> CorrectionTrajectory:
    """Integrated correction to t_end, or the frozen h = 0 mode."""
    if config.correction.frozen:
        return CorrectionTrajectory.zero(params, t_end)
    return integrate_correction(params, t_end, tol=config.correction.rtol, atol=config.correction.atol)


def analyze(result: SimulationResult) -> SimulationResult:
    """Attach the exponent and boundedness reports; fit failures become a note."""
    config = result.config
    window = config.fit_window
    try:
        result.rate_report = rate_report(
            result.series,
            result.params,
            window,
            boundary_tolerance=config.fits.boundary_tolerance,
            derivative_tolerance=config.fits.derivative_tolerance,
            upper_tolerance=config.fits.upper_tolerance,
        )
        result.energy_decay = energy_decay_report(
            result.series,
            result.params,
            window,
            drift_tolerance=config.fits.drift_tolerance,
            upper_tolerance=config.fits.upper_tolerance,
        )
    except VacuumLabError as e:
        logger.warning(f"Rate analysis skipped: {e}")
        result.analysis_note = str(e)
    return result


# ============== Runner ==============

class ExperimentRunner:
    """
    Service running the lab's experiments and writing their outputs.

    Handles:
    - Output directory management
    - Config-hash stamping of every file
    - One method per CLI subcommand
    """

    def __init__(self, config: RunConfig, output_dir: Optional[str] = None):
        self.config = config
        self.output_dir = Path(output_dir or config.output.directory or settings.output_dir)
        self.config_hash = config.config_hash
        logger.info(f"Experiment runner initialized (output {self.output_dir}, config {self.config_hash[:12]})")

    def _dir(self, *parts: str) -> Path:
        return ensure_directory(self.output_dir.joinpath(*parts))

    # ---------- Barenblatt ----------

    def barenblatt(self) -> Dict[str, Any]:
        """Profile constants and sampled (x, rho_bar, u_bar) tables at the snapshot times."""
        params = self.config.gas_parameters()
        profile = derive_profile(params, self.config.params.mass)
        out = self._dir()
        times = sorted(t for t in self.config.run.snapshot_times if t >= 0.0)
        n_points = self.config.grid.n_cells + 1

        summary: Dict[str, List[float]] = {"t": [], "x_minus": [], "x_plus": [], "mass": []}
        for t in times:
            x_minus, x_plus = barenblatt_boundary(profile, params, t)
            x = np.linspace(x_minus, x_plus, n_points)
            x = 0.5 * (x - x[::-1])
            write_csv(
                out / f"barenblatt_t{_snapshot_label(t)}.csv",
                ["x", "rho_bar", "u_bar"],
                {
                    "x": x,
                    "rho_bar": barenblatt_density_clamped(profile, params, x, t),
                    "u_bar": barenblatt_velocity(params, x, t),
                },
                self.config_hash,
                metadata={"t": t},
            )
            summary["t"].append(t)
            summary["x_minus"].append(x_minus)
            summary["x_plus"].append(x_plus)
            summary["mass"].append(barenblatt_mass(profile, params, t))

        write_csv(out / "barenblatt_summary.csv", ["t", "x_minus", "x_plus", "mass"], summary, self.config_hash)
        constants = {
            "A": profile.A,
            "B": profile.B,
            "M": profile.M,
            "L": profile.L,
            "normalization": profile.normalization,
            "alpha": params.alpha,
            "expansion_rate": params.expansion_rate,
            "regime": params.regime,
        }
        write_json(out / "profile.json", {"profile": constants, "config": self.config.model_dump(by_alias=True)},
                   self.config_hash)
        logger.info(f"Barenblatt tables written to {out}")
        return {"success": True, "profile": constants, "mass": summary["mass"]}

    # ---------- Correction ----------

    def correction(self) -> Dict[str, Any]:
        """Log-spaced ansatz table plus phase-plane and decay reports."""
        params = self.config.gas_parameters()
        section = self.config.correction
        trajectory = integrate_correction(params, section.t_end, tol=section.rtol, atol=section.atol)
        out = self._dir()

        times = sample_schedule(section.t_end, self.config.run.samples_per_decade)
        table = sample_ansatz(params, trajectory, times, section.k_max)
        columns = ["t", "h", "h_t", "eta_x"] + [f"d{k}_eta_x" for k in range(1, section.k_max + 1)]
        data = {"t": times, "h": trajectory.h_at(times), "h_t": trajectory.z_at(times), "eta_x": table[0]}
        for k in range(1, section.k_max + 1):
            data[f"d{k}_eta_x"] = table[k]
        write_csv(out / "correction.csv", columns, data, self.config_hash)

        payload: Dict[str, Any] = {"config": self.config.model_dump(by_alias=True)}
        payload["final_state"] = asdict(trajectory.state_at(trajectory.t_end))
        payload["h_max"] = float(np.max(trajectory.h))
        try:
            payload["phase_plane"] = phase_plane_check(trajectory).model_dump()
        except PatternNotFound as e:
            logger.warning(f"Phase-plane pattern not found: {e}")
            payload["phase_plane"] = {"error": str(e)}
        decay = verify_decay_rates(params, trajectory, k_max=max(section.k_max, 1))
        payload["decay"] = decay.model_dump()
        payload["K"] = decay.K
        write_json(out / "correction_report.json", payload, self.config_hash)
        logger.info(f"Correction tables written to {out}")
        return {"success": True, "trajectory": trajectory, "decay": decay, "report": payload}

    # ---------- Simulation ----------

    def simulate(self, config: Optional[RunConfig] = None, out: Optional[Path] = None) -> SimulationResult:
        """Run, analyze and write summary, series, snapshots and the final report."""
        config = config or self.config
        out = ensure_directory(out) if out is not None else self._dir()
        config_hash = config.config_hash

        result = analyze(Simulation(config).run())
        self._write_simulation(result, out, config_hash)
        return result

    def _write_simulation(self, result: SimulationResult, out: Path, config_hash: str) -> None:
        series = result.series
        summary = {
            "t": series.t,
            "E0": series.energies.get(0, np.full_like(series.t, math.nan)),
            "E1": series.energies.get(1, np.full_like(series.t, math.nan)),
            "E2": series.energies.get(2, np.full_like(series.t, math.nan)),
            "sup_w": series.unweighted_sup[0],
            "sup_wt": series.unweighted_sup[1],
            "x_minus": series.x_minus,
            "x_plus": series.x_plus,
            "mass": series.mass,
            "eta_x_min": series.eta_x_min,
            "dt": series.dt,
        }
        write_csv(out / "summary.csv", SUMMARY_COLUMNS, summary, config_hash)

        detail: Dict[str, np.ndarray] = {
            "t": series.t,
            "density_ratio_sup": series.density_ratio_sup,
            "velocity_diff_sup": series.velocity_diff_sup,
            "total_energy": series.total_energy,
            "sup_total": series.sup_total,
            "embedding_ratio": series.embedding_ratio,
        }
        detail.update({f"d{k}_x_plus": v for k, v in series.boundary_derivatives.items()})
        detail.update({f"sup_{name}": v for name, v in series.sup_norms.items()})
        detail.update({f"unweighted_dt{j}_w": v for j, v in series.unweighted_sup.items()})
        detail.update(result.mixed_energies)
        write_csv(out / "series.csv", list(detail), detail, config_hash)

        for t, (state, snapshot) in sorted(result.snapshots.items()):
            write_csv(
                out / f"snapshot_t{_snapshot_label(t)}.csv",
                SNAPSHOT_COLUMNS,
                {
                    "x": result.grid.nodes,
                    "w": state.w,
                    "w_t": state.w_t,
                    "rho": snapshot.density,
                    "u": snapshot.velocity,
                    "rho_bar": snapshot.barenblatt_density,
                    "u_bar": snapshot.barenblatt_velocity,
                    "rho_diff": snapshot.density_diff,
                    "u_diff": snapshot.velocity_diff,
                },
                config_hash,
                metadata={"t": t},
            )

        embedding = series.embedding_ratio
        payload = {
            "config": result.config.model_dump(by_alias=True),
            "parameters": {
                "alpha": result.params.alpha,
                "delta": result.params.delta,
                "regime": result.params.regime,
                "derivative_count": result.config.metrics.derivative_count or result.params.derivative_count,
            },
            "outcome": result.outcome.model_dump(),
            "rates": result.rate_report.model_dump() if result.rate_report else None,
            "energy_decay": result.energy_decay.model_dump() if result.energy_decay else None,
            "embedding_ratio_sup": float(np.nanmax(embedding)) if embedding.size else 0.0,
            "sup_total_excludes": list(DIFFERENCED_NORMS),
            "refinement_sensitive_norms": list(REFINEMENT_SENSITIVE_NORMS),
            "analysis_note": result.analysis_note,
        }
        write_json(out / "report.json", payload, config_hash)
        logger.info(f"Simulation outputs written to {out}")

    # ---------- Refinement ----------

    def refine(self, n_list: Optional[Sequence[int]] = None) -> RefinementReport:
        """Solve to t_probe on each grid and compute Richardson orders on the coarsest nodes."""
        n_list = list(n_list or self.config.grid.n_list)
        t_probe = self.config.run.t_probe
        params = self.config.gas_parameters()
        trajectory = correction_trajectory(self.config, params, t_probe)

        solutions = []
        for n in n_list:
            simulation = Simulation(self.config, trajectory=trajectory, n_cells=n, t_end=t_probe)
            state = simulation.advance_to(simulation.initial_state(), t_probe)
            solutions.append(state.w)
            logger.info(f"Refinement: n={n} reached t={state.t:g} in {state.step_count} steps")

        report = convergence_table(n_list, solutions, t_probe, order_target=self.config.fits.order_target)
        out = self._dir()
        write_csv(
            out / "refinement.csv",
            ["n_coarse", "n_mid", "n_fine", "error_coarse", "error_fine", "observed_order"],
            {key: [getattr(row, key) for row in report.rows] for key in ConvergenceRow.model_fields},
            self.config_hash,
            metadata={"t_probe": t_probe},
        )
        write_json(out / "refinement.json", report.model_dump(), self.config_hash)
        return report

    # ---------- Sweep ----------

    def sweep(
        self,
        gammas: Sequence[float],
        lams: Sequence[float],
        mus: Sequence[float],
        workers: Optional[int] = None,
    ) -> List[SweepRow]:
        """Simulate every (gamma, lambda, mu) cell; a failing cell is recorded, never fatal."""
        cells = list(itertools.product(gammas, lams, mus))
        workers = workers or settings.sweep_workers
        jobs = [
            (index, gamma, lam, mu, self.config, str(self.output_dir / f"cell_{index:03d}"))
            for index, (gamma, lam, mu) in enumerate(cells)
        ]
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                rows = list(pool.map(run_sweep_cell, jobs))
        else:
            rows = [run_sweep_cell(job) for job in jobs]

        names = sorted({name for row in rows for name in row.exponents})
        table: Dict[str, List[Any]] = {
            "index": [row.index for row in rows],
            "gamma": [row.gamma for row in rows],
            "lam": [row.lam for row in rows],
            "mu": [row.mu for row in rows],
            "exit_code": [row.exit_code for row in rows],
            "error": [row.error or "" for row in rows],
        }
        for name in names:
            table[name] = [
                row.exponents.get(name) if row.exponents.get(name) is not None else math.nan for row in rows
            ]
        write_csv(self._dir() / "sweep.csv", list(table), table, self.config_hash)
        write_json(self._dir() / "sweep.json", {"rows": [row.model_dump() for row in rows]}, self.config_hash)
        failed = sum(1 for row in rows if row.exit_code != 0)
        logger.info(f"Sweep finished: {len(rows)} cells, {failed} failed")
        return rows

    # ---------- Hardy ----------

    def hardy(self, n_list: Optional[Sequence[int]] = None, thetas: Optional[Sequence[float]] = None) -> Dict[str, Any]:
        """Hardy ratios for F = 1 and F = cos(pi x / 2L) across grids and weight exponents."""
        params = self.config.gas_parameters()
        profile = derive_profile(params, self.config.params.mass)
        n_list = list(n_list or [100, 200, 400, 800, 1600])
        thetas = list(thetas or [*self.config.metrics.thetas, params.alpha + 1.0])

        results: List[Tuple[str, HardyResult]] = []
        for n in n_list:
            grid = build_grid(profile, params, n)
            functions = {"one": np.ones_like(grid.nodes), "cos": np.cos(math.pi * grid.nodes / (2.0 * grid.L))}
            for theta in thetas:
                for name, values in functions.items():
                    results.append((name, hardy_ratio(grid, values, theta)))

        variation = hardy_variation(results)
        write_csv(
            self._dir() / "hardy.csv",
            ["F", "theta", "n", "ratio", "degenerate"],
            {
                "F": [name for name, _ in results],
                "theta": [r.theta for _, r in results],
                "n": [r.n_cells for _, r in results],
                "ratio": [r.ratio for _, r in results],
                "degenerate": [r.degenerate for _, r in results],
            },
            self.config_hash,
        )
        write_json(self._dir() / "hardy.json", {"variation": variation}, self.config_hash)
        return {"success": True, "results": results, "variation": variation}

    # ---------- Rates ----------

    def rates(
        self,
        csv_path: str,
        column: str,
        window: Optional[Tuple[float, float]] = None,
        p_theory: Optional[float] = None,
        log_correction: Optional[bool] = None,
    ) -> RateFit:
        """Re-fit one column of a stored CSV."""
        table = read_csv(csv_path)
        if column not in table.data or "t" not in table.data:
            raise ConfigError(f"{csv_path} has no column '{column}' (columns: {', '.join(table.columns)})")
        fit = fit_power_law(
            table["t"],
            np.abs(table[column]),
            window or self.config.fit_window,
            quantity=column,
            p_theory=p_theory,
            log_correction=self.config.fits.log_correction if log_correction is None else log_correction,
        )
        write_json(self._dir() / f"fit_{column}.json", {"source": str(csv_path), "fit": fit.model_dump()},
                   self.config_hash)
        return fit


# ============== Helpers ==============

def convergence_table(
    n_list: Sequence[int],
    solutions: Sequence[np.ndarray],
    t_probe: float,
    order_target: float = 1.5,
) -> RefinementReport:
    """
    Richardson observed orders from solutions on successively refined grids.

    Differences are RMS norms on the nodes of the coarsest grid; for a triplet
    (n, r n, r^2 n) the order is log(e_coarse / e_fine) / log r. The study
    passes when the errors decrease and the finest triplet reaches order_target.

    Raises:
        ConfigError: If the grids are not refined by one constant integer ratio
    """
    if len(n_list) < 3 or len(n_list) != len(solutions):
        raise ConfigError("Refinement needs at least three grids with one solution each")
    ratios = {n_list[k + 1] / n_list[k] for k in range(len(n_list) - 1)}
    if len(ratios) != 1 or any(n_list[k + 1] % n_list[k] for k in range(len(n_list) - 1)):
        raise ConfigError(f"Grids must be refined by a constant integer ratio, got {list(n_list)}")
    ratio = ratios.pop()

    base = n_list[0]
    on_base = [np.asarray(w)[:: n // base] for n, w in zip(n_list, solutions)]
    errors = [float(np.sqrt(np.mean((on_base[k] - on_base[k + 1]) ** 2))) for k in range(len(on_base) - 1)]

    rows = []
    for k in range(len(errors) - 1):
        coarse, fine = errors[k], errors[k + 1]
        order = math.log(coarse / fine) / math.log(ratio) if coarse > 0.0 and fine > 0.0 else math.nan
        rows.append(
            ConvergenceRow(
                n_coarse=n_list[k],
                n_mid=n_list[k + 1],
                n_fine=n_list[k + 2],
                error_coarse=coarse,
                error_fine=fine,
                observed_order=order,
            )
        )
    monotone = all(errors[k + 1] < errors[k] for k in range(len(errors) - 1))
    asymptotic = rows[-1].observed_order
    report = RefinementReport(
        t_probe=t_probe,
        n_list=list(n_list),
        errors=errors,
        rows=rows,
        monotone=monotone,
        order_target=order_target,
        asymptotic_order=asymptotic,
        passed=monotone and asymptotic >= order_target,
    )
    logger.info(
        f"Refinement orders: {[round(row.observed_order, 3) for row in rows]}, monotone={monotone}, "
        f"finest-triplet order {asymptotic:.3f} (target {order_target:g})"
    )
    return report


def hardy_variation(results: Sequence[Tuple[str, HardyResult]]) -> Dict[str, float]:
    """(max - min) / min of the ratio across grids, per (F, theta)."""
    grouped: Dict[str, List[float]] = {}
    for name, result in results:
        if not result.degenerate:
            grouped.setdefault(f"{name}@{result.theta:g}", []).append(result.ratio)
    return {key: (max(values) - min(values)) / min(values) for key, values in grouped.items() if min(values) > 0}


def run_sweep_cell(job: Tuple[int, float, float, float, RunConfig, str]) -> SweepRow:
    """Run one sweep cell in isolation. Module level so process pools can pickle it."""
    index, gamma, lam, mu, template, directory = job
    row = SweepRow(index=index, gamma=gamma, lam=lam, mu=mu, exit_code=0, directory=directory)
    try:
        config = template.with_overrides([f"params.gamma={gamma}", f"params.lambda={lam}", f"params.mu={mu}"])
        result = ExperimentRunner(config, directory).simulate(config, Path(directory))
    except VacuumLabError as e:
        logger.warning(f"Sweep cell {index} (gamma={gamma}, lambda={lam}, mu={mu}) failed: {e}")
        row.exit_code = e.exit_code
        row.error = str(e)
        return row
    except Exception as e:
        logger.error(f"Sweep cell {index} crashed: {e}", exc_info=True)
        row.exit_code = 1
        row.error = str(e)
        return row

    row.exit_code = result.outcome.exit_code
    row.error = result.outcome.message or None
    if result.rate_report is not None:
        row.exponents = {r.quantity: r.fitted for r in result.rate_report.rows}
    return row
