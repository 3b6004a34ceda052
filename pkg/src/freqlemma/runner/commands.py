"""
Command implementations shared by the CLI and the HTTP service.

Every cmd_* takes a validated config model and an optional output
directory. It returns a JSON-ready summary, and when `out` is given it
also writes its result files (and summary.json) there.
"""
import logging
from pathlib import Path
from typing import Callable, List, Optional, Tuple, Union

import numpy as np

from .. import io
from ..behavior import BehaviorQuery, dd_simulate, freq_response_eval, transfer_matrix_at
from ..benchmarks import CONTROLLERS, controller_preset, plant_preset
from ..control.lqr import LqrWeights, dd_lqr
from ..control.receding import (
    DeePCController,
    FreePCController,
    ModelMPCController,
    PredictiveController,
    monte_carlo,
    receding_horizon_run,
)
from ..core import FrequencyGrid, SpectraCollection, Trajectory
from ..errors import ConfigError, FreqLemmaError
from ..excitation import is_cpe, is_pe_time
from ..models.run_config import (
    CheckPeConfig,
    ClosedLoopConfig,
    EstimateFrfConfig,
    ExcitationSpec,
    FreqRespConfig,
    GenDataConfig,
    LqrConfig,
    MonteCarloConfig,
    SimulateConfig,
    SystemSpec,
)
from ..plantlab import (
    FrfEstimate,
    NoiseConfig,
    PeriodRecords,
    StateSpaceModel,
    TransferFunction,
    average_spectra,
    closed_loop_collect,
    estimate_frf,
    frf_to_spectra,
    multisine,
    per_period_dft,
    random_phases,
    simulate,
    steady_state_spectrum,
    tf_to_state_space,
    unit_input_directions,
)


logger = logging.getLogger(__name__)


def build_system(spec: SystemSpec) -> Union[StateSpaceModel, TransferFunction]:
    if spec.preset is not None:
        if spec.preset in CONTROLLERS:
            return controller_preset(spec.preset)
        return plant_preset(spec.preset)
    if spec.A is not None:
        return StateSpaceModel.from_matrices(spec.A, spec.B, spec.C, spec.D)
    return TransferFunction(spec.numerators, spec.denominators)


def build_plant(spec: SystemSpec) -> StateSpaceModel:
    system = build_system(spec)
    return system if isinstance(system, StateSpaceModel) else tf_to_state_space(system)


def _initial_state(plant: StateSpaceModel, values: Optional[List[float]]) -> np.ndarray:
    if values is None:
        return np.zeros(plant.n_x)
    x0 = np.asarray(values, dtype=float)
    if x0.size != plant.n_x:
        raise ConfigError(f"initial_state needs {plant.n_x} entries, got {x0.size}")
    return x0


def _noise_seed(seq: np.random.SeedSequence) -> int:
    return int(seq.generate_state(1)[0])


def _prepare(out: Optional[Path]) -> Optional[Path]:
    if out is None:
        return None
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _finish(out: Optional[Path], summary: dict) -> dict:
    if out is not None:
        io.write_json(out / "summary.json", summary)
    logger.info("%s finished: %s", summary.get("command"), {k: v for k, v in summary.items() if not isinstance(v, (list, dict))})
    return summary


def collect_measurements(
    plant: StateSpaceModel,
    controller: Union[StateSpaceModel, TransferFunction],
    grid: FrequencyGrid,
    excitation: ExcitationSpec,
    noise_std: float,
    seed: np.random.SeedSequence,
) -> List[PeriodRecords]:
    """
    One closed-loop experiment per plant input, each injecting a multisine
    with random phases into that input only.
    """
    phase_seed, noise_seed = seed.spawn(2)
    rng = np.random.default_rng(phase_seed)
    eye = np.eye(plant.n_u)
    injections = [
        multisine(excitation.amplitude, grid, random_phases(grid, rng), grid.period, direction=eye[i])
        for i in range(plant.n_u)
    ]
    noise = NoiseConfig(standard_deviation=noise_std, seed=_noise_seed(noise_seed))
    return closed_loop_collect(
        plant, controller, injections, noise, excitation.transient_periods, excitation.periods,
    )


def measured_dataset(
    records: List[PeriodRecords], grid: FrequencyGrid, mode: str,
) -> Tuple[SpectraCollection, Optional[FrfEstimate]]:
    spectra = [per_period_dft(r, grid) for r in records]
    if mode == "frf":
        frf = estimate_frf(spectra, grid)
        return frf_to_spectra(frf), frf
    return average_spectra(spectra), None


def cmd_gen_data(config: GenDataConfig, out: Optional[Path] = None) -> dict:
    out = _prepare(out)
    plant = build_plant(config.plant)
    grid = FrequencyGrid(config.grid.M)
    summary = {"command": "gen-data", "mode": config.mode, "M": grid.M}

    if config.mode == "direct":
        spectra = steady_state_spectrum(plant, grid, unit_input_directions(plant.n_u, grid.M))
        if not config.include_states:
            spectra = SpectraCollection(spectra.inputs, spectra.outputs)
    else:
        controller = build_system(config.controller)
        records = collect_measurements(
            plant, controller, grid, config.excitation, config.noise.standard_deviation,
            np.random.SeedSequence(config.seed),
        )
        spectra, frf = measured_dataset(records, grid, config.dataset)
        summary["dataset_kind"] = config.dataset
        summary["periods"] = config.excitation.periods
        if out is not None:
            for e, rec in enumerate(records):
                io.write_trajectory_csv(out / f"raw_e{e + 1}.csv", *rec.flatten())
            if frf is not None:
                io.write_json(out / "frf.json", io.frf_payload(frf))

    summary["E"] = spectra.E
    summary["has_states"] = spectra.states is not None
    if out is not None:
        io.write_dataset(out / "dataset.json", spectra)
        summary["dataset"] = "dataset.json"
    return _finish(out, summary)


def cmd_estimate_frf(config: EstimateFrfConfig, out: Optional[Path] = None) -> dict:
    out = _prepare(out)
    plant = build_plant(config.plant)
    grid = FrequencyGrid(config.grid.M)
    records = collect_measurements(
        plant, build_system(config.controller), grid, config.excitation,
        config.noise.standard_deviation, np.random.SeedSequence(config.seed),
    )
    frf = estimate_frf([per_period_dft(r, grid) for r in records], grid)
    payload = io.frf_payload(frf)
    if out is not None:
        io.write_json(out / "frf.json", payload)
    summary = {"command": "estimate-frf", "periods": frf.periods, "excited_bins": int(frf.excited.sum())}
    summary.update(payload)
    return _finish(out, summary)


def cmd_check_pe(config: CheckPeConfig, out: Optional[Path] = None) -> dict:
    out = _prepare(out)
    if config.dataset is not None:
        report = is_cpe(io.read_dataset(config.dataset).inputs, config.order, config.tolerance)
        domain = "frequency"
    else:
        u, _ = io.read_trajectory_csv(config.trajectory)
        report = is_pe_time(u, config.order, config.tolerance)
        domain = "time"
    summary = {"command": "check-pe", "domain": domain, **report.model_dump()}
    return _finish(out, summary)


def cmd_simulate(config: SimulateConfig, out: Optional[Path] = None) -> dict:
    out = _prepare(out)
    spectra = io.read_dataset(config.dataset)
    u_future = Trajectory(np.asarray(config.u_future, dtype=float))
    plant = build_plant(config.plant) if config.plant is not None else None

    u_past = y_past = None
    if config.u_past is not None:
        u_past = Trajectory(np.asarray(config.u_past, dtype=float), start=-len(config.u_past))
        if config.y_past is not None:
            y_past = Trajectory(np.asarray(config.y_past, dtype=float), start=u_past.start)
        else:
            _, y_gen = simulate(plant, _initial_state(plant, config.initial_state), u_past)
            y_past = Trajectory(y_gen.samples, start=u_past.start)

    query = BehaviorQuery(u_future=u_future, u_past=u_past, y_past=y_past)
    result = dd_simulate(spectra, query, config.tolerance, config.state_order)
    u_full = np.vstack([u_past.samples, u_future.samples]) if u_past is not None else u_future.samples
    u_traj = Trajectory(u_full, start=-query.L0)

    summary = {
        "command": "simulate",
        "L0": query.L0,
        "L": query.L,
        "residual": result.residual,
        "y_future": result.y_future.samples.tolist(),
    }
    extra = {}
    if plant is not None:
        _, y_true = simulate(plant, _initial_state(plant, config.initial_state), u_traj)
        true_future = y_true.samples[query.L0:]
        error = float(np.linalg.norm(result.y_future.samples - true_future))
        summary["absolute_error"] = error
        summary["relative_error"] = error / max(float(np.linalg.norm(true_future)), np.finfo(float).tiny)
        extra = {f"y{i + 1}_true": y_true.samples[:, i] for i in range(y_true.channel_count)}
    if out is not None:
        io.write_trajectory_csv(out / "simulation.csv", u_traj, result.y_full, extra)
    return _finish(out, summary)


def cmd_freqresp(config: FreqRespConfig, out: Optional[Path] = None) -> dict:
    out = _prepare(out)
    spectra = io.read_dataset(config.dataset)
    entries = []
    for i, (re, im) in enumerate(config.points):
        z = complex(re, im)
        if config.inputs is None:
            H = transfer_matrix_at(spectra, z, config.L0, config.tolerance, config.state_order)
            entries.append({"z": [re, im], "H": io.complex_pairs(H)})
        else:
            U_z = io.from_complex_pairs(config.inputs[i])
            Y_z = freq_response_eval(spectra, z, U_z, config.L0, config.tolerance, config.state_order)
            entries.append({"z": [re, im], "U": io.complex_pairs(U_z), "Y": io.complex_pairs(Y_z)})
    if out is not None:
        io.write_json(out / "freqresp.json", {"L0": config.L0, "points": entries})
    return _finish(out, {"command": "freqresp", "L0": config.L0, "points": entries})


def cmd_lqr(config: LqrConfig, out: Optional[Path] = None) -> dict:
    out = _prepare(out)
    spectra = io.read_dataset(config.dataset)
    weights = LqrWeights(np.asarray(config.Q, dtype=float), np.asarray(config.R, dtype=float))
    result = dd_lqr(spectra, weights, tolerance=config.tolerance)
    payload = {
        "P": result.P.tolist(),
        "K": result.K.tolist(),
        "diagnostics": {
            "status": result.sdp.status,
            "iterations": result.sdp.iterations,
            "gap": result.sdp.gap,
            "trace_P": float(np.trace(result.P)),
        },
    }
    if out is not None:
        io.write_json(out / "lqr.json", payload)
    return _finish(out, {"command": "lqr", **payload})


def _closed_loop(kind: str, config: ClosedLoopConfig, out: Optional[Path]) -> dict:
    out = _prepare(out)
    plant = build_plant(config.plant)
    controller: PredictiveController
    if kind == "freepc":
        if config.dataset is None:
            raise ConfigError("freepc needs a dataset")
        controller = FreePCController(io.read_dataset(config.dataset), config.problem, config.state_order)
    elif kind == "deepc":
        if config.trajectory is None:
            raise ConfigError("deepc needs a trajectory CSV")
        u, y = io.read_trajectory_csv(config.trajectory)
        controller = DeePCController(u, y, config.problem, config.state_order)
    else:
        controller = ModelMPCController(plant, config.problem)

    std = config.noise.standard_deviation
    noise = NoiseConfig(standard_deviation=std, seed=config.seed) if std > 0 else None
    result = receding_horizon_run(
        controller, plant, config.steps,
        x0=_initial_state(plant, config.initial_state), noise=noise, bootstrap=config.bootstrap,
    )
    if out is not None:
        io.write_trajectory_csv(out / "closed_loop.csv", result.u, result.y,
                                {"J_cumulative": result.cumulative_cost})
    summary = {
        "command": kind,
        "steps": config.steps,
        "J": result.cost,
        "u": result.u.samples.tolist(),
        "y": result.y.samples.tolist(),
    }
    return _finish(out, summary)


def cmd_freepc(config: ClosedLoopConfig, out: Optional[Path] = None) -> dict:
    return _closed_loop("freepc", config, out)


def cmd_deepc(config: ClosedLoopConfig, out: Optional[Path] = None) -> dict:
    return _closed_loop("deepc", config, out)


def cmd_mpc(config: ClosedLoopConfig, out: Optional[Path] = None) -> dict:
    return _closed_loop("mpc", config, out)


def _run_or_nan(step: Callable[[], float], run: int, p: int) -> float:
    try:
        return step()
    except FreqLemmaError as exc:
        logger.warning("run %d with p=%d failed: %s", run, p, exc)
        return float("nan")


def _statistics(values: np.ndarray) -> dict:
    ok = values[np.isfinite(values)]
    return {
        "mean": float(ok.mean()) if ok.size else None,
        "median": float(np.median(ok)) if ok.size else None,
        "variance": float(ok.var(ddof=1)) if ok.size > 1 else None,
        "failures": int(values.size - ok.size),
    }


def closed_loop_study(config: MonteCarloConfig) -> Tuple[dict, List[list]]:
    """
    Closed-loop FreePC cost over seeded datasets. Run i uses the same
    excitation phases and noise seed for every period count.
    """
    plant = build_plant(config.plant)
    controller = build_system(config.controller)
    grid = FrequencyGrid(config.grid.M)
    x0 = _initial_state(plant, config.initial_state)
    problem = config.problem

    def run_freepc(data: SpectraCollection) -> float:
        ctrl = FreePCController(data, problem)
        return receding_horizon_run(ctrl, plant, config.steps, x0=x0, bootstrap=config.bootstrap).cost

    rows, per_p = [], {}
    for p in config.periods:
        excitation = config.excitation.model_copy(update={"periods": p})

        def task(i: int, seq: np.random.SeedSequence, excitation=excitation, p=p) -> float:
            def step():
                records = collect_measurements(plant, controller, grid, excitation,
                                               config.noise.standard_deviation, seq)
                return run_freepc(measured_dataset(records, grid, config.dataset)[0])
            return _run_or_nan(step, i, p)

        costs = np.asarray(monte_carlo(task, config.runs, config.seed, config.workers))
        per_p[str(p)] = _statistics(costs)
        rows.extend([i, p, float(c)] for i, c in enumerate(costs))
        logger.info("p=%d: mean J %.6g over %d runs", p, per_p[str(p)]["mean"] or float("nan"), config.runs)

    summary = {"command": "monte-carlo", "study": "closed_loop", "runs": config.runs, "J": per_p}
    if config.include_benchmark:
        mpc = ModelMPCController(plant, problem)
        summary["J_benchmark"] = receding_horizon_run(
            mpc, plant, config.steps, x0=x0, bootstrap=config.bootstrap,
        ).cost
    return summary, rows


def simulation_error_study(config: MonteCarloConfig) -> Tuple[dict, List[list]]:
    """
    Data-driven simulation error over seeded noisy datasets. The past
    window starts from rest with random inputs; the same query is used in
    every run.
    """
    plant = build_plant(config.plant)
    controller = build_system(config.controller)
    grid = FrequencyGrid(config.grid.M)
    L0, L = config.past_length, config.horizon

    query_seed = np.random.SeedSequence(config.seed).spawn(config.runs + 1)[-1]
    rng = np.random.default_rng(query_seed)
    u_all = rng.standard_normal((L0 + L, plant.n_u))
    _, y_all = simulate(plant, np.zeros(plant.n_x), Trajectory(u_all))
    query = BehaviorQuery(
        u_future=Trajectory(u_all[L0:]),
        u_past=Trajectory(u_all[:L0], start=-L0),
        y_past=Trajectory(y_all.samples[:L0], start=-L0),
    )
    y_true = y_all.samples[L0:]
    true_norm = float(np.linalg.norm(y_true))

    rows, per_p = [], {}
    for p in config.periods:
        excitation = config.excitation.model_copy(update={"periods": p})

        def task(i: int, seq: np.random.SeedSequence, excitation=excitation, p=p) -> float:
            def step():
                records = collect_measurements(plant, controller, grid, excitation,
                                               config.noise.standard_deviation, seq)
                data = measured_dataset(records, grid, config.dataset)[0]
                prediction = dd_simulate(data, query).y_future.samples
                return float(np.linalg.norm(prediction - y_true))
            return _run_or_nan(step, i, p)

        errors = np.asarray(monte_carlo(task, config.runs, config.seed, config.workers))
        absolute = _statistics(errors)
        relative = _statistics(errors / true_norm)
        per_p[str(p)] = {"absolute": absolute, "relative": relative}
        rows.extend([i, p, float(e)] for i, e in enumerate(errors))
        logger.info("p=%d: median absolute error %.6g", p, absolute["median"] or float("nan"))

    summary = {
        "command": "monte-carlo",
        "study": "simulation_error",
        "runs": config.runs,
        "true_norm": true_norm,
        "errors": per_p,
    }
    return summary, rows


def cmd_monte_carlo(config: MonteCarloConfig, out: Optional[Path] = None) -> dict:
    out = _prepare(out)
    if config.study == "closed_loop":
        summary, rows = closed_loop_study(config)
        header = ["run", "p", "J"]
    else:
        summary, rows = simulation_error_study(config)
        header = ["run", "p", "error"]
    if out is not None:
        io.write_rows(out / "monte_carlo.csv", header, rows)
    return _finish(out, summary)


COMMANDS = {
    "gen-data": cmd_gen_data,
    "estimate-frf": cmd_estimate_frf,
    "check-pe": cmd_check_pe,
    "simulate": cmd_simulate,
    "freqresp": cmd_freqresp,
    "lqr": cmd_lqr,
    "freepc": cmd_freepc,
    "deepc": cmd_deepc,
    "mpc": cmd_mpc,
    "monte-carlo": cmd_monte_carlo,
}
