from dataclasses import asdict, dataclass, fields, replace

# PSD clipping is relative to lambda_1, the PD floor is absolute.
EPS_PSD = 1e-10
EPS_PD = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    """Knobs shared by the classical and quantum solvers."""

    tol: float = 1e-11
    max_iter: int = 10_000
    damping: float = 1.0
    seed: int = 0
    starts: int = 1
    anderson: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol!r}")
        if int(self.max_iter) < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter!r}")
        if not 0 < self.damping <= 1:
            raise ValueError(f"damping must lie in (0, 1], got {self.damping!r}")
        if int(self.starts) < 1:
            raise ValueError(f"starts must be >= 1, got {self.starts!r}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def override(self, **changes):
        return replace(self, **{k: v for k, v in changes.items() if v is not None})
