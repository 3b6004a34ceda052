"""
Readers and writers for dataset JSON, trajectory CSV and result files.

CSV numbers are written with 17 significant digits so that files read back
bit-for-bit.
"""
import csv
import json
import logging
from pathlib import Path
from typing import Any, Optional, Sequence, Tuple, Type, TypeVar, Union

import numpy as np
from pydantic import BaseModel, ValidationError

from .core import FrequencyGrid, SpectraCollection, Spectrum, Trajectory
from .errors import ConfigError
from .models.dataset import ExperimentSpectra, SpectraDataset
from .plantlab import FrfEstimate


logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
ModelT = TypeVar("ModelT", bound=BaseModel)


def fmt(value: float) -> str:
    return f"{value:.17g}"


def complex_pairs(samples: np.ndarray) -> list:
    arr = np.asarray(samples, dtype=complex)
    return np.stack([arr.real, arr.imag], axis=-1).tolist()


def from_complex_pairs(rows) -> np.ndarray:
    arr = np.asarray(rows, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def _read_text(path: PathLike) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def load_model(path: PathLike, model: Type[ModelT]) -> ModelT:
    """Validate a JSON file against `model`; any failure is a ConfigError."""
    try:
        return model.model_validate_json(_read_text(path))
    except ValidationError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def spectra_to_dataset(spectra: SpectraCollection) -> SpectraDataset:
    experiments = []
    for e in range(spectra.E):
        experiments.append(ExperimentSpectra(
            U=complex_pairs(spectra.inputs[e].samples),
            Y=complex_pairs(spectra.outputs[e].samples),
            X=None if spectra.states is None else complex_pairs(spectra.states[e].samples),
        ))
    grid = spectra.grid
    return SpectraDataset(M=grid.M, frequencies=grid.frequencies.tolist(), experiments=experiments)


def dataset_to_spectra(dataset: SpectraDataset) -> SpectraCollection:
    grid = FrequencyGrid(dataset.M)
    with_states = [exp.X is not None for exp in dataset.experiments]
    if any(with_states) and not all(with_states):
        raise ConfigError("either every experiment carries X or none does")
    try:
        return SpectraCollection(
            inputs=tuple(Spectrum(grid, from_complex_pairs(exp.U)) for exp in dataset.experiments),
            outputs=tuple(Spectrum(grid, from_complex_pairs(exp.Y)) for exp in dataset.experiments),
            states=tuple(Spectrum(grid, from_complex_pairs(exp.X)) for exp in dataset.experiments)
            if all(with_states) else None,
        )
    except ValueError as exc:
        raise ConfigError(f"malformed dataset: {exc}") from exc


def write_dataset(path: PathLike, spectra: SpectraCollection) -> Path:
    path = Path(path)
    path.write_text(spectra_to_dataset(spectra).model_dump_json(indent=2))
    logger.info("wrote dataset with E=%d, M=%d to %s", spectra.E, spectra.grid.M, path)
    return path


def read_dataset(path: PathLike) -> SpectraCollection:
    return dataset_to_spectra(load_model(path, SpectraDataset))


def write_json(path: PathLike, payload: Any) -> Path:
    path = Path(path)
    if isinstance(payload, BaseModel):
        text = payload.model_dump_json(indent=2)
    else:
        text = json.dumps(payload, indent=2)
    path.write_text(text)
    return path


def write_rows(path: PathLike, header: Sequence[str], rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def trajectory_header(n_u: int, n_y: int) -> list:
    return ["k"] + [f"u{i + 1}" for i in range(n_u)] + [f"y{i + 1}" for i in range(n_y)]


def write_trajectory_csv(path: PathLike, u: Trajectory, y: Trajectory, extra: Optional[dict] = None) -> Path:
    """
    Columns k, u1.., y1.. (and any `extra` columns, name -> per-sample values).
    k counts from the trajectory's start index.
    """
    if u.length != y.length:
        raise ConfigError("u and y must have the same length")
    extra = extra or {}
    header = trajectory_header(u.channel_count, y.channel_count) + list(extra)
    columns = [np.asarray(v, dtype=float).reshape(-1) for v in extra.values()]
    rows = (
        [u.start + k, *u.samples[k], *y.samples[k], *(c[k] for c in columns)]
        for k in range(u.length)
    )
    return write_rows(path, header, rows)


def read_trajectory_csv(path: PathLike) -> Tuple[Trajectory, Trajectory]:
    """Inverse of `write_trajectory_csv`; columns other than k/u*/y* are ignored."""
    text = _read_text(path)
    reader = csv.reader(text.splitlines())
    try:
        header = next(reader)
    except StopIteration:
        raise ConfigError(f"{path} is empty") from None
    u_cols = [i for i, name in enumerate(header) if name.startswith("u") and name[1:].isdigit()]
    y_cols = [i for i, name in enumerate(header) if name.startswith("y") and name[1:].isdigit()]
    if not header or header[0] != "k" or not u_cols or not y_cols:
        raise ConfigError(f"{path}: header must be k,u1..,y1.., got {header}")
    try:
        rows = [[float(v) for v in row] for row in reader if row]
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not rows:
        raise ConfigError(f"{path} holds no samples")
    data = np.asarray(rows)
    start = int(data[0, 0])
    return Trajectory(data[:, u_cols], start), Trajectory(data[:, y_cols], start)


def frf_payload(frf: FrfEstimate) -> dict:
    return {
        "frequency": frf.grid.frequencies.tolist(),
        "H_re": frf.H.real.tolist(),
        "H_im": frf.H.imag.tolist(),
        "variance": frf.variance.tolist(),
        "periods": frf.periods,
        "excited": frf.excited.tolist(),
    }
