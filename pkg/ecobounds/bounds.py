# ecobounds - treatment effect bounds for covariates unobserved in the study
# Copyright (C) 2026 CZ.NIC, z.s.p.o. <http://www.nic.cz>
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.

import logging
import typing

from dataclasses import asdict, dataclass

import numpy as np
import pandas as pd

from ecobounds.errors import ConfigError, EmptyCellError

logger = logging.getLogger("ecobounds.bounds")

LOWER = "lower"
UPPER = "upper"
SIDES = (LOWER, UPPER)
THIN_CELL = 0.01


@dataclass(frozen=True)
class BoundPair:
    gamma_lower: float
    gamma_upper: float
    tau_lower: float
    tau_upper: float
    clipped_lower: bool
    clipped_upper: bool
    thin_cell: bool = False

    @property
    def width(self):
        return self.gamma_upper - self.gamma_lower

    def contains(self, value, tolerance=0.0):
        return self.gamma_lower - tolerance <= value <= self.gamma_upper + tolerance

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class SensitivityLevel:
    delta: float

    def __post_init__(self):
        if not (np.isfinite(self.delta) and self.delta >= 0):
            raise ConfigError("sensitivity level must be >= 0", delta=self.delta)

    def check(self, bounds):
        if self.delta > bounds.width:
            raise ConfigError("sensitivity level exceeds b - a", delta=self.delta, width=bounds.width)
        return self


@dataclass(frozen=True)
class Branches:
    """ Smooth pieces of one side of the bound, stacked on the last axis.

    The bound is the max (lower) or min (upper) over ``values``. ``d_mu`` and ``d_nu``
    are the partial derivatives of each piece in Δμ and ν. Piece 0 is always τ, so
    ties resolve to τ as the closed inequalities of the indicator require.
    """

    values: np.ndarray
    d_mu: np.ndarray
    d_nu: np.ndarray
    side: str

    def select(self, tau_shift=0.0):
        """ One-hot indicator of the active piece (``tau_shift`` moves τ only). """
        values = self.values
        if tau_shift:
            values = values.copy()
            values[..., 0] = values[..., 0] + tau_shift
        best = np.argmax(values, axis=-1) if self.side == LOWER else np.argmin(values, axis=-1)
        return np.eye(values.shape[-1], dtype=bool)[best]

    def bound(self):
        return self.values.max(axis=-1) if self.side == LOWER else self.values.min(axis=-1)


def branches(delta_mu, nu, bounds, side, delta=None):
    """ Branch values and derivatives at arrays ``delta_mu`` and ``nu`` (same shape).

    Lower side pieces: τ_ℓ, a-b and with a level δ also Δμ - δ(1-ν)/ν and Δμ - δ.
    The upper side mirrors them.
    """
    if side not in SIDES:
        raise ConfigError("unknown side", side=side)
    delta_mu, nu = np.broadcast_arrays(np.asarray(delta_mu, dtype=float), np.asarray(nu, dtype=float))
    width = bounds.width
    sign = -1.0 if side == LOWER else 1.0
    zero, one = np.zeros_like(nu), np.ones_like(nu)
    with np.errstate(divide="ignore", invalid="ignore"):
        tau = (delta_mu + sign * width * (1.0 - nu)) / nu
        values = [tau, np.full_like(nu, sign * width)]
        d_mu = [1.0 / nu, zero]
        d_nu = [(-sign * width - tau) / nu, zero]
        if delta is not None:
            values += [delta_mu + sign * delta * (1.0 - nu) / nu, delta_mu + sign * delta]
            d_mu += [one, one]
            d_nu += [-sign * delta / nu ** 2, zero]
    return Branches(
        values=np.stack(values, axis=-1),
        d_mu=np.stack(d_mu, axis=-1),
        d_nu=np.stack(d_nu, axis=-1),
        side=side,
    )


def compute_bounds(delta_mu, nu, bounds, delta=None):
    """ Vectorized bound evaluation; cells with ν <= 0 come back as NaN.

    :return: dict of arrays keyed like the BoundPair fields plus ``empty_cell``
    """
    delta_mu, nu = np.broadcast_arrays(np.asarray(delta_mu, dtype=float), np.asarray(nu, dtype=float))
    empty = ~(nu > 0)
    safe_nu = np.where(empty, 1.0, nu)
    out = {}
    for side, reduce in ((LOWER, np.maximum), (UPPER, np.minimum)):
        values = branches(delta_mu, safe_nu, bounds, side, delta).values
        # taus and floors are pieces (0, 2) and (1, 3)
        tau = values[..., 0] if delta is None else reduce(values[..., 0], values[..., 2])
        floor = values[..., 1] if delta is None else reduce(values[..., 1], values[..., 3])
        gamma = reduce(tau, floor)
        clipped = floor > tau if side == LOWER else floor < tau
        out["tau_" + side] = np.where(empty, np.nan, tau)
        out["gamma_" + side] = np.where(empty, np.nan, gamma)
        out["clipped_" + side] = clipped & ~empty
    out["thin_cell"] = (nu < THIN_CELL) & ~empty
    out["empty_cell"] = empty
    return out


def _pair(delta_mu, nu_vw, bounds, delta):
    if not nu_vw > 0:
        raise EmptyCellError(nu=nu_vw)
    if nu_vw > 1:
        raise ConfigError("nu must lie in (0, 1]", nu=nu_vw)
    values = compute_bounds(delta_mu, nu_vw, bounds, delta)
    if values["thin_cell"]:
        logger.warning("thin cell: nu=%g", nu_vw)
    return BoundPair(
        gamma_lower=float(values["gamma_lower"]),
        gamma_upper=float(values["gamma_upper"]),
        tau_lower=float(values["tau_lower"]),
        tau_upper=float(values["tau_upper"]),
        clipped_lower=bool(values["clipped_lower"]),
        clipped_upper=bool(values["clipped_upper"]),
        thin_cell=bool(values["thin_cell"]),
    )


def worst_case_bounds(delta_mu, nu_vw, bounds):
    """ Worst-case bounds on the fully conditional effect at one profile.

    :param delta_mu: μ₁(v) - μ₀(v)
    :param nu_vw: P(W=w | V=v, E=0)
    :param bounds: OutcomeBounds [a, b]
    :rtype: BoundPair
    """
    return _pair(delta_mu, nu_vw, bounds, None)


def sensitivity_bounds(delta_mu, nu_vw, bounds, level):
    """ Bounds when the fully conditional and restricted effects differ by at most δ.

    The δ-pieces are intersected with the worst-case bounds, so a large δ never
    widens past them.
    """
    level.check(bounds)
    return _pair(delta_mu, nu_vw, bounds, level.delta)


def pointwise_bounds(dataset, eta, level=None):
    """ Bounds for every target unit and every W level.

    Empty cells show up as NaN rows flagged ``empty_cell``; the sweep goes on.

    :rtype: pandas.DataFrame
    """
    delta = None
    if level is not None:
        delta = level.check(dataset.bounds).delta
    units = np.flatnonzero(dataset.e == 0)
    v = dataset.v[units]
    n_levels = dataset.w_support.size
    nu = eta.nu(v)
    delta_mu = eta.delta_mu(v)[:, None] * np.ones((1, n_levels))
    values = compute_bounds(delta_mu, nu, dataset.bounds, delta)
    frame = pd.DataFrame(
        {
            "unit_id": np.repeat(units, n_levels),
            "w_level": np.tile(np.arange(n_levels), len(units)),
            "observed_w": np.repeat(dataset.w[units], n_levels) == np.tile(np.arange(n_levels), len(units)),
        }
    )
    for name in (
        "gamma_lower",
        "gamma_upper",
        "tau_lower",
        "tau_upper",
        "clipped_lower",
        "clipped_upper",
    ):
        frame[name] = values[name].ravel()
    frame["nu"] = nu.ravel()
    frame["thin_cell"] = values["thin_cell"].ravel()
    frame["empty_cell"] = values["empty_cell"].ravel()
    if frame["empty_cell"].any():
        logger.warning("%d empty cells in pointwise bounds", int(frame["empty_cell"].sum()))
    if frame["thin_cell"].any():
        logger.warning("%d thin cells (nu < %g) in pointwise bounds", int(frame["thin_cell"].sum()), THIN_CELL)
    return frame
