import numpy as np

from ecobounds.data_model import MISSING, Dataset, OutcomeBounds, WSupport
from ecobounds.nuisance import Constant, NuisanceSet


def binary_support(name="w"):
    return WSupport(levels=((0.0,), (1.0,)), names=(name,))


def level_support(n_levels, name="w"):
    return WSupport(levels=tuple((float(k),) for k in range(n_levels)), names=(name,))


class ConstantNu(object):
    def __init__(self, row):
        self.row = np.asarray(row, dtype=float)

    def __call__(self, v):
        return np.tile(self.row, (np.atleast_2d(v).shape[0], 1))


class LinearFn(object):
    def __init__(self, intercept, slope):
        self.intercept = intercept
        self.slope = np.asarray(slope, dtype=float)

    def __call__(self, v):
        return self.intercept + np.atleast_2d(v) @ self.slope


def constant_eta(bounds, nu_row, mu0=0.2, mu1=0.6, rho0=0.5, arm=0.5, eps=1e-9):
    return NuisanceSet(
        mu0=mu0 if callable(mu0) else Constant(mu0),
        mu1=mu1 if callable(mu1) else Constant(mu1),
        rho0=Constant(rho0),
        arm=Constant(arm),
        nu=ConstantNu(nu_row),
        bounds=bounds,
        n_levels=len(nu_row),
        eps=eps,
    )


def random_dataset(n=400, seed=0, n_levels=2, bounds=(0.0, 1.0), y_fn=None):
    """ Study/target mix with one V column and one W coordinate. """
    rng = np.random.default_rng(seed)
    v = rng.uniform(-1.0, 1.0, size=(n, 1))
    e = (rng.uniform(size=n) < 0.5).astype(int)
    w = rng.integers(0, n_levels, size=n)
    a = (rng.uniform(size=n) < 0.5).astype(int)
    if y_fn is None:
        y = np.clip(0.5 + 0.2 * v[:, 0] + 0.1 * a + rng.normal(0.0, 0.1, size=n), *bounds)
    else:
        y = y_fn(v, a, w)
    study = e == 1
    return Dataset(
        v=v,
        e=e,
        w=np.where(study, MISSING, w),
        a=np.where(study, a, MISSING),
        y=np.where(study, y, np.nan),
        bounds=OutcomeBounds(*bounds),
        w_support=level_support(n_levels),
    )
