"""
Deterministic synthetic stratified-reservoir temperature fields.

The vertical profile is a logistic step between a warm surface layer and a
cold bottom layer, plus a linear longitudinal trend, a Gaussian cooling bump
around the withdrawal (intake) depth and a small smooth seeded perturbation::

    T(x, z) = t_bottom + (t_surface - t_bottom) * sigmoid((z_c - z) / w)
              + g * x_km - a_intake * exp(-((z - z_intake) / (2 dz))**2)
              + perturbation(x, z)
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import ParameterError
from .grid import FieldGrid, Snapshot, SnapshotLibrary

#: intake depths (m) of the six withdrawal scenarios
INTAKE_DEPTHS = (5.0, 15.0, 25.0, 35.0, 45.0, 55.0)

_FLOAT_FIELDS = (
    "t_surface",
    "t_bottom",
    "thermocline_depth",
    "thermocline_width",
    "longitudinal_gradient",
    "intake_depth",
    "intake_strength",
    "perturbation_amplitude",
)


@dataclass(frozen=True)
class StratificationParams:
    """Parameters of one synthetic temperature field.

    Temperatures in degC, depths and widths in m, ``longitudinal_gradient`` in
    degC per km of distance from the upstream end.
    """

    t_surface: float = 20.0
    t_bottom: float = 6.0
    thermocline_depth: float = 12.0
    thermocline_width: float = 3.0
    longitudinal_gradient: float = 0.01
    intake_depth: float = 25.0
    intake_strength: float = 1.0
    seed: int = 0
    perturbation_amplitude: float = 0.1

    def __post_init__(self):
        if self.t_surface < self.t_bottom:
            raise ParameterError("t_surface must be >= t_bottom")
        if not self.thermocline_width > 0:
            raise ParameterError("thermocline_width must be positive")
        if self.intake_strength < 0:
            raise ParameterError("intake_strength must be non-negative")
        if self.perturbation_amplitude < 0:
            raise ParameterError("perturbation_amplitude must be non-negative")

    def replace(self, **changes) -> "StratificationParams":
        return dataclasses.replace(self, **changes)


def vertical_profile(z, p: StratificationParams):
    """Logistic stratification term alone (no trend, intake or perturbation)."""
    z = np.asarray(z, dtype=float)
    return p.t_bottom + (p.t_surface - p.t_bottom) * expit((p.thermocline_depth - z) / p.thermocline_width)


def _perturbation(grid: FieldGrid, p: StratificationParams) -> np.ndarray:
    # longitudinal sine series plus a term decreasing with depth, so the
    # perturbation never breaks vertical monotonicity
    if p.perturbation_amplitude == 0:
        return np.zeros(grid.n)
    rng = np.random.default_rng(p.seed)
    c = rng.uniform(-1.0, 1.0, size=3)
    d = rng.uniform(0.0, 1.0)
    xi = grid.distance / grid.length
    zeta = grid.depth / grid.water_depth
    orders = np.arange(1, 4)
    horiz = np.sin(np.pi * orders[None, :] * xi[:, None]) @ c
    vert = d * np.cos(0.5 * np.pi * zeta)
    scale = np.abs(c).sum() + d
    return p.perturbation_amplitude * (horiz + vert) / scale


def generate_snapshot(grid: FieldGrid, p: StratificationParams, label=None) -> Snapshot:
    """Temperature field for ``p`` on every wet cell of ``grid``."""
    if not 0.0 <= p.intake_depth <= grid.water_depth:
        raise ParameterError(f"intake_depth {p.intake_depth} m outside the water column [0, {grid.water_depth}]")
    z = grid.depth
    x_km = grid.distance / 1000.0
    values = (
        vertical_profile(z, p)
        + p.longitudinal_gradient * x_km
        - p.intake_strength * np.exp(-(((z - p.intake_depth) / (2.0 * grid.dz)) ** 2))
        + _perturbation(grid, p)
    )
    if label is None:
        label = f"intake={p.intake_depth:g}"
    return Snapshot(grid, values, str(label))


#: stratified season covered by :func:`seasonal_params` (day of year)
SEASON = (120.0, 300.0)


def seasonal_params(base: StratificationParams, day_of_year: float) -> StratificationParams:
    """Summer stratification at ``day_of_year`` (120..300).

    The surface warms to ``base.t_surface`` at mid-season and cools again,
    while the thermocline deepens steadily from 0.5x to 1.5x
    ``base.thermocline_depth``. Bottom temperature, intake and trend are
    taken from ``base``.
    """
    lo, hi = SEASON
    if not lo <= day_of_year <= hi:
        raise ParameterError(f"day_of_year {day_of_year} outside the stratified season {SEASON}")
    frac = (day_of_year - lo) / (hi - lo)
    warmth = 0.4 + 0.6 * np.sin(np.pi * frac)
    return base.replace(
        t_surface=float(base.t_bottom + (base.t_surface - base.t_bottom) * warmth),
        thermocline_depth=float(base.thermocline_depth * (0.5 + frac)),
    )


def draw_params(base: StratificationParams, spread: dict | None, rng: np.random.Generator) -> StratificationParams:
    """Draw one parameter set, each key of ``spread`` uniform in its ``[low, high]``.

    The key ``day_of_year`` is drawn first and mapped through
    :func:`seasonal_params`; the key ``intake_choices`` picks one of a list of
    intake depths. Other keys must name float fields and are drawn in
    sorted order on top of the seasonal state.
    """
    if not spread:
        return base
    spread = dict(spread)
    if "day_of_year" in spread:
        low, high = spread.pop("day_of_year")
        base = seasonal_params(base, float(rng.uniform(low, high)))
    if "intake_choices" in spread:
        choices = list(spread.pop("intake_choices"))
        base = base.replace(intake_depth=float(choices[int(rng.integers(len(choices)))]))
    changes = {}
    for name in sorted(spread):
        if name not in _FLOAT_FIELDS:
            raise ParameterError(f"cannot vary {name!r}; choose from {_FLOAT_FIELDS}")
        low, high = spread[name]
        if high < low:
            raise ParameterError(f"spread for {name!r} has high < low")
        changes[name] = float(rng.uniform(low, high))
    if "t_surface" in changes or "t_bottom" in changes:
        ts = changes.get("t_surface", base.t_surface)
        tb = changes.get("t_bottom", base.t_bottom)
        if ts < tb:
            changes["t_surface"], changes["t_bottom"] = tb, ts
    return base.replace(**changes)


def generate_library(
    grid: FieldGrid,
    base: StratificationParams,
    n_snapshots: int,
    spread: dict | None = None,
    seed: int = 0,
) -> SnapshotLibrary:
    """Uncentered library of ``n_snapshots`` fields drawn around ``base``.

    Parameters
    ----------
    spread : dict, optional
        Maps a float field of :class:`StratificationParams` to a ``(low, high)``
        range; each snapshot draws those fields uniformly. Fields not listed
        keep their ``base`` value. An empty spread yields identical columns.
    seed : int
        Seed of the parameter draws. The smooth perturbation keeps
        ``base.seed`` so it is shared by every snapshot.
    """
    if n_snapshots < 1:
        raise ParameterError("n_snapshots must be >= 1")
    rng = np.random.default_rng(seed)
    snaps = []
    for i in range(n_snapshots):
        p = draw_params(base, spread, rng)
        snaps.append(generate_snapshot(grid, p, label=f"train-{i:03d}"))
    return SnapshotLibrary.from_snapshots(snaps)
