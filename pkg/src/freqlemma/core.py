"""
Trajectories, spectra and the block data matrices built from them.

Column layout used throughout the package for a data matrix of depth L
built from E experiments on an M-point grid:

    [ F(k=0) | F(k=1) ... F(k=M-1) | conj F(k=1) ... conj F(k=M-1) ]

with one block of E columns per frequency. The real form keeps the same
ordering:

    [ Re F(k=0..M-1) | Im F(k=1..M-1) ]
"""
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidInput


logger = logging.getLogger(__name__)

ROLES = ("input", "state", "output")


@dataclass(frozen=True)
class Trajectory:
    """
    Samples v_r .. v_s of a real vector signal, stored as an (N, n_v) array.
    """
    samples: np.ndarray
    start: int = 0

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
            raise InvalidInput(f"trajectory needs shape (N, n_v) with N, n_v >= 1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidInput("trajectory has non-finite samples")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @classmethod
    def from_vector(cls, vector, channel_count: int, start: int = 0) -> "Trajectory":
        """Inverse of `vectorized`: (v_r; v_{r+1}; ...) back to samples."""
        vec = np.asarray(vector, dtype=float).reshape(-1)
        if channel_count < 1 or vec.size % channel_count:
            raise InvalidInput(
                f"vector of length {vec.size} does not split into {channel_count} channels"
            )
        return cls(vec.reshape(-1, channel_count), start)

    @classmethod
    def zeros(cls, length: int, channel_count: int, start: int = 0) -> "Trajectory":
        return cls(np.zeros((length, channel_count)), start)

    @property
    def channel_count(self) -> int:
        return self.samples.shape[1]

    @property
    def length(self) -> int:
        return self.samples.shape[0]

    @property
    def stop(self) -> int:
        return self.start + self.length - 1

    def __len__(self) -> int:
        return self.length

    def vectorized(self) -> np.ndarray:
        return self.samples.reshape(-1)

    def window(self, first: int, last: int) -> "Trajectory":
        """Restriction to the index range [first, last] (inclusive)."""
        if first < self.start or last > self.stop or first > last:
            raise InvalidInput(
                f"window [{first}, {last}] outside trajectory range [{self.start}, {self.stop}]"
            )
        lo = first - self.start
        return Trajectory(self.samples[lo:lo + last - first + 1], first)


@dataclass(frozen=True)
class FrequencyGrid:
    """Equidistant grid w_k = pi k / M, k = 0..M-1, in radians per sample."""
    M: int

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise InvalidInput(f"grid size M must be a positive integer, got {self.M}")
        object.__setattr__(self, "M", int(self.M))

    @property
    def frequencies(self) -> np.ndarray:
        return np.pi * np.arange(self.M) / self.M

    @property
    def points(self) -> np.ndarray:
        """e^{j w_k} on the unit circle."""
        return np.exp(1j * self.frequencies)

    @property
    def period(self) -> int:
        return 2 * self.M


@dataclass(frozen=True)
class Spectrum:
    """One complex sample V_k per grid frequency, as an (M, n_v) array."""
    grid: FrequencyGrid
    samples: np.ndarray

    def __post_init__(self):
        arr = np.array(self.samples, dtype=complex)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2 or arr.shape[0] != self.grid.M or arr.shape[1] == 0:
            raise InvalidInput(
                f"spectrum needs shape (M={self.grid.M}, n_v), got {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise InvalidInput("spectrum has non-finite samples")
        dc = arr[0]
        if np.max(np.abs(dc.imag)) > 1e-12 * max(1.0, float(np.max(np.abs(dc)))):
            raise InvalidInput("spectrum sample at frequency 0 must be real")
        arr[0] = dc.real
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @classmethod
    def zeros(cls, grid: FrequencyGrid, channel_count: int) -> "Spectrum":
        return cls(grid, np.zeros((grid.M, channel_count), dtype=complex))

    @property
    def channel_count(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True)
class SpectraCollection:
    """
    Input/output (and optionally state) spectra of E experiments on one grid.
    """
    inputs: Tuple[Spectrum, ...]
    outputs: Tuple[Spectrum, ...]
    states: Optional[Tuple[Spectrum, ...]] = None

    def __post_init__(self):
        inputs = tuple(self.inputs)
        outputs = tuple(self.outputs)
        states = None if self.states is None else tuple(self.states)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "outputs", outputs)
        object.__setattr__(self, "states", states)

        if not inputs:
            raise InvalidInput("a spectra collection needs at least one experiment")
        if len(outputs) != len(inputs) or (states is not None and len(states) != len(inputs)):
            raise InvalidInput("every experiment needs an input, an output (and a state) spectrum")
        for role, group in (("input", inputs), ("output", outputs), ("state", states or ())):
            _check_shared(group, role)
        for group in (outputs, states or ()):
            if group and group[0].grid != inputs[0].grid:
                raise InvalidInput("all spectra must share one frequency grid")

    @property
    def grid(self) -> FrequencyGrid:
        return self.inputs[0].grid

    @property
    def E(self) -> int:
        return len(self.inputs)

    @property
    def n_u(self) -> int:
        return self.inputs[0].channel_count

    @property
    def n_y(self) -> int:
        return self.outputs[0].channel_count

    @property
    def n_x(self) -> Optional[int]:
        return None if self.states is None else self.states[0].channel_count

    def role(self, name: str) -> Tuple[Spectrum, ...]:
        if name == "input":
            return self.inputs
        if name == "output":
            return self.outputs
        if name == "state":
            if self.states is None:
                raise InvalidInput("dataset carries no state spectra")
            return self.states
        raise InvalidInput(f"unknown role {name!r}; expected one of {ROLES}")


def _check_shared(group: Sequence[Spectrum], role: str) -> None:
    if not group:
        return
    grid, n_v = group[0].grid, group[0].channel_count
    for spec in group[1:]:
        if spec.grid != grid:
            raise InvalidInput(f"{role} spectra live on different grids")
        if spec.channel_count != n_v:
            raise InvalidInput(f"{role} spectra have differing channel counts")


@dataclass(frozen=True)
class DataMatrix:
    """
    Stacked frequency-domain data matrix of one depth, in complex and real form.

    `row_slices` maps each role to its rows in both forms.
    """
    complex_form: np.ndarray
    real_form: np.ndarray
    depth: int
    roles: Tuple[str, ...]
    row_slices: Dict[str, slice] = field(default_factory=dict)
    M: int = 1
    E: int = 1

    def rows(self, role: str) -> np.ndarray:
        """Real-form rows belonging to `role`."""
        if role not in self.row_slices:
            raise InvalidInput(f"data matrix has no {role!r} rows")
        return self.real_form[self.row_slices[role]]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.real_form.shape


def hankel(depth: int, traj: Trajectory) -> np.ndarray:
    """Block-Hankel matrix with block (i, j) = v_{r+i+j}; shape (n_v L, N-L+1)."""
    N = traj.length
    if depth < 1 or depth > N:
        raise InvalidInput(f"Hankel depth must lie in [1, {N}], got {depth}")
    # windows[j] is the (n_v, L) block v_j..v_{j+L-1}
    windows = sliding_window_view(traj.samples, depth, axis=0)
    return windows.transpose(2, 1, 0).reshape(depth * traj.channel_count, N - depth + 1)


def vandermonde_column(L: int, z: complex) -> np.ndarray:
    """(1, z, z^2, ..., z^{L-1})."""
    if L < 1:
        raise InvalidInput(f"L must be >= 1, got {L}")
    return np.power(complex(z), np.arange(L))


def cal_f_matrix(L: int, spectra: Sequence[Spectrum], start_index: int = 0) -> np.ndarray:
    """
    Columns W_L(e^{j w_k}) (x) V_k^e for k = start_index..M-1, grouped per
    frequency with the E experiments side by side.
    """
    spectra = list(spectra)
    if not spectra:
        raise InvalidInput("need at least one spectrum")
    _check_shared(spectra, "data")
    if start_index not in (0, 1):
        raise InvalidInput(f"start_index must be 0 or 1, got {start_index}")
    if L < 1:
        raise InvalidInput(f"L must be >= 1, got {L}")
    grid = spectra[0].grid
    if start_index >= grid.M:
        raise InvalidInput("empty frequency range")

    ks = np.arange(start_index, grid.M)
    W = np.power.outer(grid.points[ks], np.arange(L))           # (K, L)
    V = np.stack([s.samples[ks] for s in spectra])              # (E, K, n_v)
    n_v, E, K = V.shape[2], V.shape[0], ks.size
    blocks = np.einsum("kl,ekv->lvke", W, V)
    return blocks.reshape(L * n_v, K * E)


def f_matrix(L: int, spectrum: Spectrum, start_index: int = 0) -> np.ndarray:
    return cal_f_matrix(L, [spectrum], start_index)


def conjugate_stack(L: int, spectra: Sequence[Spectrum]) -> Tuple[np.ndarray, np.ndarray]:
    """[F(k>=0) | conj F(k>=1)] and its real form for a list of same-role spectra."""
    positive = cal_f_matrix(L, spectra, 0)
    if spectra[0].grid.M == 1:
        return positive, positive.real.copy()
    shifted = cal_f_matrix(L, spectra, 1)
    complex_form = np.hstack([positive, shifted.conj()])
    # equals complex_form @ t_re_transform(M, E), computed without round-off in the imaginary part
    real_form = np.hstack([positive.real, shifted.imag])
    return complex_form, real_form


def build_data_matrix(L: int, spectra: SpectraCollection, roles: Sequence[str] = ("input", "output")) -> DataMatrix:
    """
    Stack the depth-L data matrices of the requested roles, in order.
    """
    if not roles:
        raise InvalidInput("at least one role is required")
    complex_parts, real_parts, slices = [], [], {}
    row = 0
    for role in roles:
        c, r = conjugate_stack(L, spectra.role(role))
        slices[role] = slice(row, row + c.shape[0])
        row += c.shape[0]
        complex_parts.append(c)
        real_parts.append(r)
    dm = DataMatrix(
        complex_form=np.vstack(complex_parts),
        real_form=np.vstack(real_parts),
        depth=L,
        roles=tuple(roles),
        row_slices=slices,
        M=spectra.grid.M,
        E=spectra.E,
    )
    logger.debug("data matrix depth %d roles %s shape %s", L, roles, dm.shape)
    return dm


def t_re_transform(M: int, E: int = 1) -> np.ndarray:
    """
    Square map from real coordinates g to conjugate-structured G = (G0, G1, conj G1).
    """
    if M < 1 or E < 1:
        raise InvalidInput("M and E must be >= 1")
    n = E * (M - 1)
    I = np.eye(n)
    T = np.zeros((E + 2 * n, E + 2 * n), dtype=complex)
    T[:E, :E] = np.eye(E)
    T[E:E + n, E:E + n] = 0.5 * I
    T[E:E + n, E + n:] = -0.5j * I
    T[E + n:, E:E + n] = 0.5 * I
    T[E + n:, E + n:] = 0.5j * I
    return T


def from_real_coordinates(g, M: int, E: int = 1) -> np.ndarray:
    """G = T_Re g, without forming T_Re."""
    g = np.asarray(g, dtype=float).reshape(-1)
    n = E * (M - 1)
    if g.size != E + 2 * n:
        raise InvalidInput(f"expected {E + 2 * n} real coordinates, got {g.size}")
    G1 = 0.5 * (g[E:E + n] - 1j * g[E + n:])
    return np.concatenate([g[:E].astype(complex), G1, G1.conj()])


def to_real_coordinates(G, M: int, E: int = 1) -> np.ndarray:
    """g = (G0, 2 Re G1, -2 Im G1); only the G0 and G1 blocks are read."""
    G = np.asarray(G, dtype=complex).reshape(-1)
    n = E * (M - 1)
    if G.size not in (E + n, E + 2 * n):
        raise InvalidInput(f"expected {E + 2 * n} (or {E + n}) coefficients, got {G.size}")
    G1 = G[E:E + n]
    return np.concatenate([G[:E].real, 2.0 * G1.real, -2.0 * G1.imag])


def embed_on_grid(frequencies, samples, max_points: int = 4096) -> Spectrum:
    """
    Place samples given at commensurate frequencies in [0, pi) onto the
    smallest equidistant grid that contains them; other bins are zero.
    """
    freqs = np.asarray(frequencies, dtype=float).reshape(-1)
    values = np.asarray(samples, dtype=complex)
    if values.ndim == 1:
        values = values.reshape(-1, 1)
    if values.shape[0] != freqs.size or freqs.size == 0:
        raise InvalidInput("need one sample row per frequency")
    if np.any(freqs < 0) or np.any(freqs >= np.pi):
        raise InvalidInput("frequencies must lie in [0, pi)")

    ratios = [Fraction(float(w / np.pi)).limit_denominator(max_points) for w in freqs]
    for w, r in zip(freqs, ratios):
        if abs(float(r) * np.pi - w) > 1e-9 * max(1.0, w):
            raise InvalidInput(f"frequency {w} is not commensurate within a {max_points}-point grid")
    M = lcm(*[r.denominator for r in ratios])
    if M > max_points:
        raise InvalidInput(f"common grid needs {M} points (> {max_points})")

    out = np.zeros((M, values.shape[1]), dtype=complex)
    for r, v in zip(ratios, values):
        k = r.numerator * (M // r.denominator)
        out[k] = v
    logger.debug("embedded %d samples onto an M=%d grid", freqs.size, M)
    return Spectrum(FrequencyGrid(M), out)
