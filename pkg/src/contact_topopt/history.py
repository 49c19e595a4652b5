"""Per-iteration optimization record."""
from dataclasses import astuple, dataclass

COLUMNS = ("iter", "objective", "volume", "volume_fraction", "ell", "gamma", "newton_iters", "wall_ms")


@dataclass(frozen=True)
class HistoryRow:
    iter: int
    objective: float
    volume: float
    volume_fraction: float
    ell: float
    gamma: float
    newton_iters: int
    wall_ms: int


class History:
    """Rows appended in strictly increasing iteration order.

    Drivers also attach the final design (``mesh`` and, for phase-field
    runs, ``phi``) as attributes.
    """

    def __init__(self, domain_volume):
        if not domain_volume > 0:
            raise ValueError("domain volume must be positive")
        self.domain_volume = float(domain_volume)
        self.rows = []
        self.mesh = None
        self.phi = None

    def append(self, it, objective, volume, ell, gamma, newton_iters, wall_ms=0):
        if self.rows and it <= self.rows[-1].iter:
            raise ValueError(f"iteration {it} does not follow {self.rows[-1].iter}")
        if not self.rows and it != 0:
            raise ValueError("history must start at iteration 0")
        row = HistoryRow(int(it), float(objective), float(volume), float(volume) / self.domain_volume,
                         float(ell), float(gamma), int(newton_iters), int(wall_ms))
        self.rows.append(row)
        return row

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def __getitem__(self, i):
        return self.rows[i]

    def column(self, name):
        idx = COLUMNS.index(name)
        return [astuple(r)[idx] for r in self.rows]
