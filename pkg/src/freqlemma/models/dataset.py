from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator


Complex = Tuple[float, float]  # [re, im]


class ExperimentSpectra(BaseModel):
    """
    One experiment of a dataset file.

    - U, Y, X: M rows, one [re, im] pair per channel
    - X is only present for datasets that carry state spectra
    """
    U: List[List[Complex]]
    Y: List[List[Complex]]
    X: Optional[List[List[Complex]]] = None


class SpectraDataset(BaseModel):
    """
    On-disk form of a spectra collection.

    - M: grid size, frequencies are pi k / M for k = 0..M-1
    - frequencies: radians per sample, written for readability
    """
    M: int = Field(ge=1)                  # e.g. 10
    frequencies: List[float]
    experiments: List[ExperimentSpectra] = Field(min_length=1)

    @model_validator(mode="after")
    def _check_grid(self):
        if len(self.frequencies) != self.M:
            raise ValueError(f"expected {self.M} frequencies, got {len(self.frequencies)}")
        expected = np.pi * np.arange(self.M) / self.M
        if not np.allclose(self.frequencies, expected, rtol=0.0, atol=1e-9):
            raise ValueError("frequencies must be pi k / M, k = 0..M-1")
        for e, exp in enumerate(self.experiments):
            for name in ("U", "Y", "X"):
                rows = getattr(exp, name)
                if rows is not None and len(rows) != self.M:
                    raise ValueError(f"experiment {e}: {name} needs {self.M} rows, got {len(rows)}")
        return self
