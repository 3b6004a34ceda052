"""
Persistence-of-excitation tests.

Every test reduces to a full-row-rank check on a data matrix: a Hankel
matrix in the time domain, the conjugate-augmented F_L matrix for one
spectrum, or its multi-experiment version for collective excitation.
"""
import logging
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, model_validator

from . import linalg
from .core import SpectraCollection, Spectrum, Trajectory, conjugate_stack, hankel
from .errors import InvalidInput


logger = logging.getLogger(__name__)


class PeReport(BaseModel):
    """
    Outcome of a PE/CPE test.

    - singular_value_margin: the rank_required-th singular value (0 when the
      matrix has fewer columns), so borderline data is visible.
    """
    requested_order: int
    achieved: bool
    rank_found: int
    rank_required: int
    singular_value_margin: float

    @model_validator(mode="after")
    def _achieved_matches_rank(self):
        if self.achieved != (self.rank_found == self.rank_required):
            raise ValueError("achieved must equal (rank_found == rank_required)")
        return self


def _report(matrix: np.ndarray, order: int, tolerance: Optional[float]) -> PeReport:
    required = matrix.shape[0]
    found = linalg.rank(matrix, tolerance)
    s = linalg.singular_values(matrix)
    margin = float(s[required - 1]) if s.size >= required else 0.0
    return PeReport(
        requested_order=order,
        achieved=found == required,
        rank_found=found,
        rank_required=required,
        singular_value_margin=margin,
    )


def is_pe_time(traj: Trajectory, order: int, tolerance: Optional[float] = None) -> PeReport:
    if order < 1 or order > traj.length:
        raise InvalidInput(f"PE order must lie in [1, {traj.length}], got {order}")
    return _report(hankel(order, traj), order, tolerance)


def is_cpe(spectra: Sequence[Spectrum], order: int, tolerance: Optional[float] = None) -> PeReport:
    """Collective PE of the spectra of E experiments (one role)."""
    spectra = list(spectra)
    if not spectra:
        raise InvalidInput("need at least one spectrum")
    M, E = spectra[0].grid.M, len(spectra)
    if order < 1 or order > E * (2 * M - 1):
        raise InvalidInput(
            f"PE of order {order} is impossible with E={E} experiments on M={M} frequencies "
            f"(at most {E * (2 * M - 1)})"
        )
    _, real_form = conjugate_stack(order, spectra)
    report = _report(real_form, order, tolerance)
    logger.debug("CPE order %d: rank %d/%d", order, report.rank_found, report.rank_required)
    return report


def is_pe_freq(spectrum: Spectrum, order: int, tolerance: Optional[float] = None) -> PeReport:
    return is_cpe([spectrum], order, tolerance)


def input_state_rank(spectra: SpectraCollection, order: int, tolerance: Optional[float] = None) -> PeReport:
    """
    Full-row-rank test of [F_L(inputs); F_1(states)], the data property that
    guarantees every state/input combination is represented.
    """
    if spectra.states is None:
        raise InvalidInput("input/state rank needs state spectra")
    _, u_real = conjugate_stack(order, spectra.inputs)
    _, x_real = conjugate_stack(1, spectra.states)
    return _report(np.vstack([u_real, x_real]), order, tolerance)
