"""
Synthetic data-collection lab: ground-truth LTI plants, closed-loop
experiments with periodic excitation, per-period DFTs and FRF estimates.

Nothing in the data-driven modules depends on this one; it only produces
datasets and serves as the oracle in tests.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.signal

from . import linalg
from .core import FrequencyGrid, SpectraCollection, Spectrum, Trajectory
from .errors import DegenerateBin, DivergedLoop, EigenvalueHit, IllPosedLoop, InvalidInput


logger = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e9


@dataclass(frozen=True)
class StateSpaceModel:
    """
    x_{k+1} = A x_k + B u_k,  y_k = C x_k + D u_k.

    n_x may be 0 (a static gain), in which case A, B, C are empty.
    """
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise InvalidInput(f"A must be square, got shape {A.shape}")
        D = np.array(np.atleast_2d(self.D), dtype=float)
        n_x, (n_y, n_u) = A.shape[0], D.shape
        B = np.array(self.B, dtype=float)
        C = np.array(self.C, dtype=float)
        if B.size != n_x * n_u or C.size != n_y * n_x:
            raise InvalidInput(
                f"B{B.shape} and C{C.shape} do not fit A{A.shape} and D{D.shape}"
            )
        B = B.reshape(n_x, n_u)
        C = C.reshape(n_y, n_x)
        for name, mat in (("A", A), ("B", B), ("C", C), ("D", D)):
            if not np.all(np.isfinite(mat)):
                raise InvalidInput(f"{name} has non-finite entries")
            mat.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)

    @classmethod
    def from_matrices(cls, A, B, C, D=None) -> "StateSpaceModel":
        """Shape-checked constructor; D defaults to zero."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        C = np.atleast_2d(np.asarray(C, dtype=float))
        if A.shape[0] != A.shape[1] or B.shape[0] != A.shape[0] or C.shape[1] != A.shape[0]:
            raise InvalidInput(
                f"inconsistent dimensions A{A.shape} B{B.shape} C{C.shape}"
            )
        if D is None:
            D = np.zeros((C.shape[0], B.shape[1]))
        D = np.atleast_2d(np.asarray(D, dtype=float))
        if D.shape != (C.shape[0], B.shape[1]):
            raise InvalidInput(f"D must be {C.shape[0]}x{B.shape[1]}, got {D.shape}")
        return cls(A, B, C, D)

    @classmethod
    def static_gain(cls, D) -> "StateSpaceModel":
        D = np.atleast_2d(np.asarray(D, dtype=float))
        return cls(np.zeros((0, 0)), np.zeros((0, D.shape[1])), np.zeros((D.shape[0], 0)), D)

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def n_u(self) -> int:
        return self.D.shape[1]

    @property
    def n_y(self) -> int:
        return self.D.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.A) if self.n_x else np.zeros(0, dtype=complex)


@dataclass(frozen=True)
class TransferFunction:
    """
    Rational transfer matrix, one SISO numerator/denominator pair per
    (output, input) entry, coefficients in descending powers of z.
    """
    numerators: Tuple[Tuple[np.ndarray, ...], ...]
    denominators: Tuple[Tuple[np.ndarray, ...], ...]

    def __post_init__(self):
        nums = tuple(tuple(np.atleast_1d(np.asarray(c, dtype=float)) for c in row) for row in self.numerators)
        dens = tuple(tuple(np.atleast_1d(np.asarray(c, dtype=float)) for c in row) for row in self.denominators)
        if not nums or not nums[0]:
            raise InvalidInput("transfer function needs at least one entry")
        shape = (len(nums), len(nums[0]))
        if any(len(r) != shape[1] for r in nums) or len(dens) != shape[0] or any(len(r) != shape[1] for r in dens):
            raise InvalidInput("numerator and denominator grids must be rectangular and match")
        for row in dens:
            for den in row:
                if den.size == 0 or den[0] == 0.0:
                    raise InvalidInput("denominator leading coefficient must be nonzero")
        object.__setattr__(self, "numerators", nums)
        object.__setattr__(self, "denominators", dens)

    @classmethod
    def siso(cls, numerator, denominator) -> "TransferFunction":
        return cls(((numerator,),), ((denominator,),))

    @property
    def n_y(self) -> int:
        return len(self.numerators)

    @property
    def n_u(self) -> int:
        return len(self.numerators[0])

    def evaluate(self, z: complex) -> np.ndarray:
        H = np.empty((self.n_y, self.n_u), dtype=complex)
        for i in range(self.n_y):
            for j in range(self.n_u):
                H[i, j] = np.polyval(self.numerators[i][j], z) / np.polyval(self.denominators[i][j], z)
        return H


@dataclass(frozen=True)
class NoiseConfig:
    """Zero-mean Gaussian output noise, one standard deviation per channel."""
    standard_deviation: Union[float, Sequence[float]] = 0.0
    seed: int = 0

    def __post_init__(self):
        if np.any(np.asarray(self.standard_deviation, dtype=float) < 0):
            raise InvalidInput("noise standard deviation must be >= 0")

    def sample(self, steps: int, channels: int, seed: Optional[int] = None) -> np.ndarray:
        std = np.broadcast_to(np.asarray(self.standard_deviation, dtype=float), (channels,))
        rng = np.random.Generator(np.random.PCG64(self.seed if seed is None else seed))
        return rng.normal(0.0, 1.0, size=(steps, channels)) * std


@dataclass(frozen=True)
class PeriodRecords:
    """Retained periods of one experiment; each array has shape (p, 2M, n)."""
    d: np.ndarray
    u: np.ndarray
    y: np.ndarray

    @property
    def periods(self) -> int:
        return self.u.shape[0]

    def flatten(self) -> Tuple[Trajectory, Trajectory]:
        """Concatenated (u, y) time series over all retained periods."""
        return (Trajectory(self.u.reshape(-1, self.u.shape[2])),
                Trajectory(self.y.reshape(-1, self.y.shape[2])))


@dataclass(frozen=True)
class PeriodSpectra:
    """Per-period spectra at the grid bins; each array has shape (p, M, n)."""
    grid: FrequencyGrid
    d: np.ndarray
    u: np.ndarray
    y: np.ndarray


@dataclass(frozen=True)
class FrfEstimate:
    """
    Period-averaged FRF with its sample variance.

    H and variance have shape (M, n_y, n_u); bins where the injection has no
    energy are flagged in `excited` and carry zeros.
    """
    grid: FrequencyGrid
    H: np.ndarray
    variance: np.ndarray
    periods: int
    excited: np.ndarray


def simulate(model: StateSpaceModel, x0, inputs: Trajectory) -> Tuple[Optional[Trajectory], Trajectory]:
    """
    Exact recursion from x0; returns (x_0..x_{N-1}, y_0..y_{N-1}).
    States are None for a static model.
    """
    if inputs.channel_count != model.n_u:
        raise InvalidInput(f"model has {model.n_u} inputs, trajectory has {inputs.channel_count}")
    x = np.asarray(x0 if x0 is not None else np.zeros(model.n_x), dtype=float).reshape(-1)
    if x.size != model.n_x:
        raise InvalidInput(f"x0 must have {model.n_x} entries, got {x.size}")

    u = inputs.samples
    N = inputs.length
    xs = np.empty((N, model.n_x))
    ys = np.empty((N, model.n_y))
    for k in range(N):
        xs[k] = x
        ys[k] = model.C @ x + model.D @ u[k]
        x = model.A @ x + model.B @ u[k]
    states = Trajectory(xs, inputs.start) if model.n_x else None
    return states, Trajectory(ys, inputs.start)


def _resolvent_check(model: StateSpaceModel, z: complex) -> np.ndarray:
    M = z * np.eye(model.n_x) - model.A
    smin = scipy.linalg.svdvals(M)[-1]
    if smin <= 1e-12 * max(1.0, np.linalg.norm(model.A, 2)):
        raise EigenvalueHit(z)
    return M


def transfer_eval(model: StateSpaceModel, z: complex) -> np.ndarray:
    """H(z) = C (zI - A)^{-1} B + D."""
    if model.n_x == 0:
        return model.D.astype(complex)
    M = _resolvent_check(model, z)
    return model.C @ scipy.linalg.solve(M, model.B.astype(complex)) + model.D


def unit_input_directions(n_u: int, M: int) -> np.ndarray:
    """Experiment e excites input channel e at every bin: shape (n_u, M, n_u)."""
    return np.repeat(np.eye(n_u)[:, None, :], M, axis=1).astype(complex)


def steady_state_spectrum(model: StateSpaceModel, grid: FrequencyGrid, input_directions) -> SpectraCollection:
    """
    Input/state/output spectra satisfying the steady-state relations

        e^{jw_k} X_k = A X_k + B U_k,   Y_k = C X_k + D U_k

    for each experiment. `input_directions` has shape (M, n_u) for one
    experiment or (E, M, n_u) for several.
    """
    U = np.asarray(input_directions, dtype=complex)
    if U.ndim == 2:
        U = U[None]
    if U.ndim != 3 or U.shape[1:] != (grid.M, model.n_u):
        raise InvalidInput(f"input directions need shape (E, {grid.M}, {model.n_u}), got {U.shape}")

    E = U.shape[0]
    X = np.zeros((E, grid.M, model.n_x), dtype=complex)
    for k, z in enumerate(grid.points):
        if model.n_x:
            lhs = _resolvent_check(model, z)
            X[:, k, :] = scipy.linalg.solve(lhs, model.B @ U[:, k, :].T).T
    Y = X @ model.C.T + U @ model.D.T

    inputs = tuple(Spectrum(grid, U[e]) for e in range(E))
    outputs = tuple(Spectrum(grid, Y[e]) for e in range(E))
    states = tuple(Spectrum(grid, X[e]) for e in range(E)) if model.n_x else None
    return SpectraCollection(inputs, outputs, states)


def random_phases(grid: FrequencyGrid, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(0.0, 2.0 * np.pi, size=grid.M)


def multisine(amplitudes, grid: FrequencyGrid, phases, length: int, direction=None) -> Trajectory:
    """
    d_k = sum_m a_m cos(w_m k + phi_m), optionally times a channel direction.
    Periodic with period 2M.
    """
    if length < 1:
        raise InvalidInput("multisine length must be >= 1")
    a = np.broadcast_to(np.asarray(amplitudes, dtype=float), (grid.M,))
    phi = np.broadcast_to(np.asarray(phases, dtype=float), (grid.M,))
    k = np.arange(length)
    d = np.cos(np.outer(k, grid.frequencies) + phi) @ a
    if direction is None:
        return Trajectory(d)
    return Trajectory(np.outer(d, np.asarray(direction, dtype=float)))


def _as_state_space(system: Union[StateSpaceModel, TransferFunction]) -> StateSpaceModel:
    return system if isinstance(system, StateSpaceModel) else tf_to_state_space(system)


def _loop_inverse(plant: StateSpaceModel, ctrl: StateSpaceModel) -> np.ndarray:
    loop_gain = np.eye(plant.n_u) + ctrl.D @ plant.D
    if linalg.rank(loop_gain) < plant.n_u:
        raise IllPosedLoop("I + D_c D is singular: the loop has no unique solution")
    return np.linalg.inv(loop_gain)


def closed_loop_matrix(plant: StateSpaceModel,
                       controller: Union[StateSpaceModel, TransferFunction]) -> np.ndarray:
    """
    State matrix of the autonomous loop u = -C(z) y on the stacked state
    (x, xc). The loop is stable iff its spectral radius is below one.
    """
    ctrl = _as_state_space(controller)
    if ctrl.n_u != plant.n_y or ctrl.n_y != plant.n_u:
        raise InvalidInput(
            f"controller is {ctrl.n_y}x{ctrl.n_u}, plant is {plant.n_y}x{plant.n_u}"
        )
    Li = _loop_inverse(plant, ctrl)
    # u = Li (-D_c C x - C_c xc)
    Ux = -Li @ ctrl.D @ plant.C
    Uc = -Li @ ctrl.C
    return np.block([
        [plant.A + plant.B @ Ux, plant.B @ Uc],
        [ctrl.B @ (plant.C + plant.D @ Ux), ctrl.A + ctrl.B @ plant.D @ Uc],
    ])


def closed_loop_collect(
    plant: StateSpaceModel,
    controller: Union[StateSpaceModel, TransferFunction],
    injections: Sequence[Trajectory],
    noise: NoiseConfig,
    p0: int,
    p: int,
) -> List[PeriodRecords]:
    """
    Run u = d - C(z) y_meas, y_meas = y + n from zero initial state, one
    experiment per injection. Each injection is one excitation period and is
    repeated p0 + p times; the first p0 periods are discarded.
    """
    ctrl = _as_state_space(controller)
    if ctrl.n_u != plant.n_y or ctrl.n_y != plant.n_u:
        raise InvalidInput(
            f"controller is {ctrl.n_y}x{ctrl.n_u}, plant is {plant.n_y}x{plant.n_u}"
        )
    if p0 < 0 or p < 1:
        raise InvalidInput("need p0 >= 0 and p >= 1")

    # (I + D_c D) u = d - C_c xc - D_c (C x + n)
    loop_inverse = _loop_inverse(plant, ctrl)
    radius = float(np.max(np.abs(np.linalg.eigvals(closed_loop_matrix(plant, ctrl))), initial=0.0))
    if radius >= 1.0:
        logger.warning("closed loop is unstable (spectral radius %.3f)", radius)

    seeds = np.random.SeedSequence(noise.seed).spawn(len(injections))
    records = []
    for e, injection in enumerate(injections):
        if injection.channel_count != plant.n_u:
            raise InvalidInput(f"injection {e} has {injection.channel_count} channels, plant has {plant.n_u} inputs")
        period = injection.length
        steps = period * (p0 + p)
        d = np.tile(injection.samples, (p0 + p, 1))
        n = noise.sample(steps, plant.n_y, seed=seeds[e])

        x = np.zeros(plant.n_x)
        xc = np.zeros(ctrl.n_x)
        u_rec = np.empty((steps, plant.n_u))
        y_rec = np.empty((steps, plant.n_y))
        for k in range(steps):
            u = loop_inverse @ (d[k] - ctrl.C @ xc - ctrl.D @ (plant.C @ x + n[k]))
            y_meas = plant.C @ x + plant.D @ u + n[k]
            magnitude = float(np.linalg.norm(y_meas))
            if not np.isfinite(magnitude) or magnitude > DIVERGENCE_LIMIT:
                raise DivergedLoop(k, magnitude)
            u_rec[k] = u
            y_rec[k] = y_meas
            x = plant.A @ x + plant.B @ u
            xc = ctrl.A @ xc + ctrl.B @ y_meas

        first = p0 * period
        records.append(PeriodRecords(
            d=d[first:].reshape(p, period, plant.n_u),
            u=u_rec[first:].reshape(p, period, plant.n_u),
            y=y_rec[first:].reshape(p, period, plant.n_y),
        ))
        logger.debug("experiment %d: %d samples simulated, %d periods kept", e, steps, p)
    return records


def period_dft(signal, grid: FrequencyGrid) -> np.ndarray:
    """
    Unnormalized DFT of each period at the grid bins.

    signal has shape (p, 2M, n); the result has shape (p, M, n) with
    V_rho(w_k) = sum_{t=0}^{2M-1} v_t e^{-j w_k t}.
    """
    arr = np.asarray(signal, dtype=float)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[1] != grid.period:
        raise InvalidInput(f"each period must hold 2M = {grid.period} samples, got shape {arr.shape}")
    return np.fft.rfft(arr, axis=1)[:, :grid.M, :]


def per_period_dft(records: PeriodRecords, grid: FrequencyGrid) -> PeriodSpectra:
    return PeriodSpectra(
        grid=grid,
        d=period_dft(records.d, grid),
        u=period_dft(records.u, grid),
        y=period_dft(records.y, grid),
    )


def estimate_frf(spectra: Sequence[PeriodSpectra], grid: FrequencyGrid, excitation_threshold: float = 1e-9) -> FrfEstimate:
    """
    Per-period estimate H_rho = Y D^H (U D^H)^{-1}, experiments stacked as
    columns (the plain ratio Y D* / (U D*) for one SISO experiment), then
    sample mean and sample variance 1/(p(p-1)) sum |H_rho - H|^2.
    """
    spectra = list(spectra)
    if not spectra:
        raise InvalidInput("need the spectra of at least one experiment")
    p = spectra[0].u.shape[0]
    if p < 2:
        raise InvalidInput("FRF variance needs at least two periods")
    if any(s.u.shape[0] != p for s in spectra):
        raise InvalidInput("all experiments must hold the same number of periods")

    # (p, M, n, E)
    D = np.stack([s.d for s in spectra], axis=-1)
    U = np.stack([s.u for s in spectra], axis=-1)
    Y = np.stack([s.y for s in spectra], axis=-1)
    n_y, n_u = Y.shape[2], U.shape[2]

    energy = np.max(np.abs(D), axis=(0, 2, 3))
    excited = energy > excitation_threshold * max(float(np.max(energy)), np.finfo(float).tiny)

    H_rho = np.zeros((p, grid.M, n_y, n_u), dtype=complex)
    for k in np.flatnonzero(excited):
        for rho in range(p):
            Dh = D[rho, k].conj().T
            num = Y[rho, k] @ Dh
            den = U[rho, k] @ Dh
            scale = np.linalg.norm(U[rho, k]) * np.linalg.norm(D[rho, k])
            s = scipy.linalg.svdvals(den)
            if s.size < n_u or scale == 0.0 or s[-1] <= 1e-12 * scale:
                raise DegenerateBin(int(k), rho)
            H_rho[rho, k] = scipy.linalg.solve(den.T, num.T).T

    H = H_rho.mean(axis=0)
    variance = np.sum(np.abs(H_rho - H) ** 2, axis=0) / (p * (p - 1))
    logger.info("FRF estimated from %d periods, %d/%d bins excited", p, int(excited.sum()), grid.M)
    return FrfEstimate(grid=grid, H=H, variance=variance, periods=p, excited=excited)


def frf_to_spectra(frf: FrfEstimate) -> SpectraCollection:
    """
    Dataset with U_k = e_e and Y_k = H_k e_e, one experiment per input.
    Unexcited bins carry zeros in both.
    """
    n_u = frf.H.shape[2]
    U = unit_input_directions(n_u, frf.grid.M)
    U[:, ~frf.excited, :] = 0.0
    H = frf.H.copy()
    H[0] = H[0].real
    Y = np.einsum("kij,ekj->eki", H, U)
    return SpectraCollection(
        inputs=tuple(Spectrum(frf.grid, U[e]) for e in range(n_u)),
        outputs=tuple(Spectrum(frf.grid, Y[e]) for e in range(n_u)),
    )


def average_spectra(spectra: Sequence[PeriodSpectra]) -> SpectraCollection:
    """Per experiment, the mean over periods of the input and output spectra."""
    spectra = list(spectra)
    if not spectra:
        raise InvalidInput("need the spectra of at least one experiment")
    grid = spectra[0].grid
    return SpectraCollection(
        inputs=tuple(Spectrum(grid, s.u.mean(axis=0)) for s in spectra),
        outputs=tuple(Spectrum(grid, s.y.mean(axis=0)) for s in spectra),
    )


def _siso_realization(num: np.ndarray, den: np.ndarray) -> StateSpaceModel:
    num = np.trim_zeros(num, "f")
    if num.size > den.size:
        raise InvalidInput(f"improper transfer function: deg num {num.size - 1} > deg den {den.size - 1}")
    if num.size == 0:
        return StateSpaceModel.static_gain([[0.0]])
    if den.size == 1:
        return StateSpaceModel.static_gain([[num[0] / den[0]]])
    A, B, C, D = scipy.signal.tf2ss(num, den)
    return StateSpaceModel(A, B, C, D)


def tf_to_state_space(tf: TransferFunction) -> StateSpaceModel:
    """
    Controllable canonical realization of every entry, concatenated: block
    diagonal A, entry (i, j) driven by input j and feeding output i.
    """
    parts = [
        (i, j, _siso_realization(tf.numerators[i][j], tf.denominators[i][j]))
        for i in range(tf.n_y)
        for j in range(tf.n_u)
    ]
    n_x = sum(m.n_x for _, _, m in parts)
    A = np.zeros((n_x, n_x))
    B = np.zeros((n_x, tf.n_u))
    C = np.zeros((tf.n_y, n_x))
    D = np.zeros((tf.n_y, tf.n_u))
    offset = 0
    for i, j, m in parts:
        s = slice(offset, offset + m.n_x)
        A[s, s] = m.A
        B[s, j] = m.B[:, 0]
        C[i, s] = m.C[0]
        D[i, j] = m.D[0, 0]
        offset += m.n_x
    return StateSpaceModel(A, B, C, D)


def observability_matrix(model: StateSpaceModel, L: int) -> np.ndarray:
    """[C; CA; ...; CA^{L-1}]."""
    if L < 1:
        raise InvalidInput("L must be >= 1")
    blocks = [model.C]
    for _ in range(L - 1):
        blocks.append(blocks[-1] @ model.A)
    return np.vstack(blocks)


def toeplitz_matrix(model: StateSpaceModel, L: int) -> np.ndarray:
    """
    Block lower-triangular Toeplitz map from u_0..u_{L-1} to the forced
    response y_0..y_{L-1}: D on the diagonal, C A^{i-j-1} B below it.
    """
    if L < 1:
        raise InvalidInput("L must be >= 1")
    n_y, n_u = model.n_y, model.n_u
    markov = [model.D]
    CA = model.C
    for _ in range(L - 1):
        markov.append(CA @ model.B)
        CA = CA @ model.A
    T = np.zeros((L * n_y, L * n_u))
    for i in range(L):
        for j in range(i + 1):
            T[i * n_y:(i + 1) * n_y, j * n_u:(j + 1) * n_u] = markov[i - j]
    return T


def observability_index(model: StateSpaceModel) -> int:
    """Smallest L at which the observability matrix reaches its final rank."""
    if model.n_x == 0:
        return 0
    final = linalg.rank(observability_matrix(model, model.n_x))
    for L in range(1, model.n_x + 1):
        if linalg.rank(observability_matrix(model, L)) == final:
            return L
    return model.n_x
