from typing import Dict, List, Literal, Optional, Tuple, Type

from pydantic import BaseModel, Field, model_validator

from ..control.predictive import PredictiveProblem


Matrix = List[List[float]]
Complex = Tuple[float, float]  # [re, im]


class SystemSpec(BaseModel):
    """
    An LTI system given in exactly one of three ways:

    - preset: name of a built-in case-study system
    - A, B, C (and optionally D): state-space matrices
    - numerators / denominators: one coefficient list per (output, input)
      entry, descending powers of z
    """
    preset: Optional[str] = None          # e.g. "batch_reactor"
    A: Optional[Matrix] = None
    B: Optional[Matrix] = None
    C: Optional[Matrix] = None
    D: Optional[Matrix] = None
    numerators: Optional[List[List[List[float]]]] = None
    denominators: Optional[List[List[List[float]]]] = None

    @model_validator(mode="after")
    def _one_form(self):
        state_space = [m is not None for m in (self.A, self.B, self.C)]
        transfer = [m is not None for m in (self.numerators, self.denominators)]
        if any(state_space) and not all(state_space):
            raise ValueError("state-space form needs A, B and C")
        if any(transfer) and not all(transfer):
            raise ValueError("transfer-function form needs numerators and denominators")
        forms = int(self.preset is not None) + int(all(state_space)) + int(all(transfer))
        if forms != 1:
            raise ValueError("give exactly one of preset, A/B/C(/D) or numerators/denominators")
        return self


class PlantSpec(SystemSpec):
    pass


class ControllerSpec(SystemSpec):
    pass


class GridSpec(BaseModel):
    M: int = Field(ge=1)                  # e.g. 10 -> frequencies pi k / 10


class NoiseSpec(BaseModel):
    standard_deviation: float = Field(default=0.0, ge=0.0)   # e.g. 0.1


class ExcitationSpec(BaseModel):
    """
    Multisine injection for closed-loop measurements.

    - amplitude: per-frequency amplitude a in a sum_m cos(w_m k + phi_m)
    - periods: retained periods p
    - transient_periods: discarded leading periods p0
    """
    amplitude: float = Field(default=1.0, gt=0.0)
    periods: int = Field(default=50, ge=2)
    transient_periods: int = Field(default=20, ge=0)


class GenDataConfig(BaseModel):
    """
    - mode "direct": noise-free steady-state spectra with unit input directions
    - mode "closed_loop": multisine experiments around a stabilizing controller;
      `dataset` picks the FRF-based ("frf") or period-averaged ("averaged") dataset
    """
    plant: PlantSpec
    grid: GridSpec
    seed: int
    mode: Literal["direct", "closed_loop"] = "direct"
    dataset: Literal["frf", "averaged"] = "frf"
    controller: Optional[ControllerSpec] = None
    excitation: ExcitationSpec = ExcitationSpec()
    noise: NoiseSpec = NoiseSpec()
    include_states: bool = True

    @model_validator(mode="after")
    def _loop_needs_controller(self):
        if self.mode == "closed_loop" and self.controller is None:
            raise ValueError("closed-loop data generation needs a controller")
        return self


class EstimateFrfConfig(BaseModel):
    plant: PlantSpec
    controller: ControllerSpec
    grid: GridSpec
    seed: int
    excitation: ExcitationSpec = ExcitationSpec()
    noise: NoiseSpec = NoiseSpec()


class CheckPeConfig(BaseModel):
    """Either a dataset file (frequency-domain CPE) or a trajectory CSV (time-domain PE)."""
    order: int = Field(ge=1)
    dataset: Optional[str] = None         # e.g. "out/dataset.json"
    trajectory: Optional[str] = None      # e.g. "out/trajectory.csv"
    tolerance: Optional[float] = Field(default=None, gt=0.0)

    @model_validator(mode="after")
    def _one_source(self):
        if (self.dataset is None) == (self.trajectory is None):
            raise ValueError("give exactly one of dataset or trajectory")
        return self


class SimulateConfig(BaseModel):
    """
    Data-driven simulation over [-L0, L-1].

    When `plant` is given the true response from `initial_state` (at time
    -L0) is simulated too; it fills in y_past if that is omitted and is used
    to report the prediction error.
    """
    dataset: str
    u_future: Matrix
    u_past: Optional[Matrix] = None
    y_past: Optional[Matrix] = None
    plant: Optional[PlantSpec] = None
    initial_state: Optional[List[float]] = None
    tolerance: float = Field(default=1e-6, gt=0.0)
    state_order: Optional[int] = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _past_window(self):
        if self.y_past is not None and self.u_past is None:
            raise ValueError("y_past needs u_past")
        if self.u_past is not None and self.y_past is None and self.plant is None:
            raise ValueError("u_past without y_past needs a plant to generate the past outputs")
        return self


class FreqRespConfig(BaseModel):
    """
    - points: complex frequencies z as [re, im]
    - inputs: one U_z per point; omitted -> the full transfer matrix H(z)
    """
    dataset: str
    L0: int = Field(ge=0)
    points: List[Complex] = Field(min_length=1)
    inputs: Optional[List[List[Complex]]] = None
    tolerance: float = Field(default=1e-6, gt=0.0)
    state_order: Optional[int] = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _one_input_per_point(self):
        if self.inputs is not None and len(self.inputs) != len(self.points):
            raise ValueError("need one input amplitude per evaluation point")
        return self


class LqrConfig(BaseModel):
    dataset: str
    Q: Matrix
    R: Matrix
    tolerance: float = Field(default=1e-10, gt=0.0)


class ClosedLoopConfig(BaseModel):
    """
    Receding-horizon run on `plant`.

    - dataset: spectra file (FreePC)
    - trajectory: time-domain CSV (DeePC)
    - noise: measurement noise fed back to the controller; the cost uses
      the noise-free output
    """
    plant: PlantSpec
    problem: PredictiveProblem
    seed: int
    steps: int = Field(default=50, ge=1)
    initial_state: Optional[List[float]] = None
    bootstrap: Literal["zeros", "free_response"] = "zeros"
    noise: NoiseSpec = NoiseSpec()
    dataset: Optional[str] = None
    trajectory: Optional[str] = None
    state_order: Optional[int] = Field(default=None, ge=0)


class MonteCarloConfig(BaseModel):
    """
    Seeded repetitions of the noisy data pipeline, one run per seed and
    period count.

    - study "closed_loop": FreePC closed-loop cost J per run (and the
      model-based benchmark once)
    - study "simulation_error": data-driven simulation error per run
    """
    study: Literal["closed_loop", "simulation_error"] = "closed_loop"
    plant: PlantSpec
    controller: ControllerSpec
    grid: GridSpec
    periods: List[int] = Field(min_length=1)   # e.g. [5, 10, 25, 50]
    runs: int = Field(ge=1)
    seed: int
    workers: Optional[int] = Field(default=None, ge=1)
    excitation: ExcitationSpec = ExcitationSpec()
    noise: NoiseSpec = NoiseSpec(standard_deviation=0.1)
    dataset: Literal["frf", "averaged"] = "frf"
    problem: Optional[PredictiveProblem] = None
    steps: int = Field(default=50, ge=1)
    initial_state: Optional[List[float]] = None
    bootstrap: Literal["zeros", "free_response"] = "zeros"
    include_benchmark: bool = True
    past_length: int = Field(default=2, ge=1)
    horizon: int = Field(default=4, ge=1)

    @model_validator(mode="after")
    def _study_fields(self):
        if self.study == "closed_loop" and self.problem is None:
            raise ValueError("closed-loop study needs a predictive problem")
        if any(p < 2 for p in self.periods):
            raise ValueError("every period count must be >= 2")
        return self


COMMAND_CONFIGS: Dict[str, Type[BaseModel]] = {
    "gen-data": GenDataConfig,
    "estimate-frf": EstimateFrfConfig,
    "check-pe": CheckPeConfig,
    "simulate": SimulateConfig,
    "freqresp": FreqRespConfig,
    "lqr": LqrConfig,
    "freepc": ClosedLoopConfig,
    "deepc": ClosedLoopConfig,
    "mpc": ClosedLoopConfig,
    "monte-carlo": MonteCarloConfig,
}
