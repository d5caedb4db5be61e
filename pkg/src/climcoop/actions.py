"""Action containers and ingestion clamping.

Learned policies routinely emit slightly out-of-range values, so all
fractional fields are clamped to [0, 1] (never erroring), quantities are
floored at zero, and self-entries of bid/tariff rows are zeroed at
ingestion. ``ActionVector`` is the single-region view; the engine works on
``ActionBatch`` (one array per field, region-major).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ActionVector:
    """One region's decisions for one step."""

    savings_rate: float
    mitigation_rate: float
    export_cap: float
    import_bids: np.ndarray  # (N,), desired imports per source region
    tariffs: np.ndarray      # (N,), tariff rate per source region

    def validate_bounds(self, region_id):
        ok = (
            0.0 <= self.savings_rate <= 1.0
            and 0.0 <= self.mitigation_rate <= 1.0
            and self.export_cap >= 0.0
            and np.all(self.import_bids >= 0.0)
            and np.all((self.tariffs >= 0.0) & (self.tariffs <= 1.0))
            and self.import_bids[region_id] == 0.0
            and self.tariffs[region_id] == 0.0
        )
        return bool(ok)


@dataclass
class ActionBatch:
    """All regions' decisions for one step, one array per field."""

    savings: np.ndarray      # (N,)
    mitigation: np.ndarray   # (N,)
    export_cap: np.ndarray   # (N,)
    import_bids: np.ndarray  # (N, N), row = importing region
    tariffs: np.ndarray      # (N, N), row = importing region

    @property
    def n_regions(self):
        return self.savings.shape[0]

    def copy(self):
        return ActionBatch(
            savings=self.savings.copy(),
            mitigation=self.mitigation.copy(),
            export_cap=self.export_cap.copy(),
            import_bids=self.import_bids.copy(),
            tariffs=self.tariffs.copy(),
        )

    def region(self, i):
        return ActionVector(
            savings_rate=float(self.savings[i]),
            mitigation_rate=float(self.mitigation[i]),
            export_cap=float(self.export_cap[i]),
            import_bids=self.import_bids[i].copy(),
            tariffs=self.tariffs[i].copy(),
        )

    @classmethod
    def zeros(cls, n):
        return cls(
            savings=np.zeros(n),
            mitigation=np.zeros(n),
            export_cap=np.zeros(n),
            import_bids=np.zeros((n, n)),
            tariffs=np.zeros((n, n)),
        )

    @classmethod
    def from_vectors(cls, vectors):
        return cls(
            savings=np.array([v.savings_rate for v in vectors], dtype=np.float64),
            mitigation=np.array(
                [v.mitigation_rate for v in vectors], dtype=np.float64
            ),
            export_cap=np.array([v.export_cap for v in vectors], dtype=np.float64),
            import_bids=np.array(
                [v.import_bids for v in vectors], dtype=np.float64
            ),
            tariffs=np.array([v.tariffs for v in vectors], dtype=np.float64),
        )


def clamp_batch(batch):
    """Clamped copy: fractions into [0, 1], quantities >= 0, zero diagonals."""
    out = ActionBatch(
        savings=np.clip(batch.savings, 0.0, 1.0),
        mitigation=np.clip(batch.mitigation, 0.0, 1.0),
        export_cap=np.maximum(batch.export_cap, 0.0),
        import_bids=np.maximum(batch.import_bids, 0.0),
        tariffs=np.clip(batch.tariffs, 0.0, 1.0),
    )
    np.fill_diagonal(out.import_bids, 0.0)
    np.fill_diagonal(out.tariffs, 0.0)
    return out
