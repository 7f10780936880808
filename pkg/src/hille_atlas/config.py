"""Default tolerances and sizes, echoed into every report."""
from __future__ import annotations

from dataclasses import asdict, dataclass

SCHEMA_VERSION = "1.0"


@dataclass(frozen=True)
class Defaults:
    ode_tol: float = 1e-16  # trailing Taylor terms relative to |f| + |f'|
    taylor_order: int = 30
    junction_rtol: float = 1e-6  # edge end value vs routed value
    jitter_fraction: float = 1e-3
    jitter_retries: int = 5
    liouville_rtol: float = 1e-12
    series_tail_tol: float = 1e-8
    volterra_tol: float = 1e-10
    volterra_max_iter: int = 20
    lambda_C: float = 10.0
    r_max: float = 30.0
    far_factor: float = 1.3  # anchor radius of a decaying solution, relative to r_max
    rays_per_sector: int = 3
    profile_samples: int = 11
    count_rtol: float = 0.05  # n(r) and N(r)/n(r) checks in `verify`

    def as_dict(self) -> dict:
        return asdict(self)


DEFAULTS = Defaults()
