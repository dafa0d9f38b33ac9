"""Busy-period Laplace-Stieltjes transforms.

``g_i(theta) = E exp(-theta B_i)`` is the minimal solution of
``g_i(theta) = psi_i(theta + lambda_bar_i - sum_j lambda_ij g_j(theta))``, reached by iterating
from ``g_i = psi_i(theta + lambda_bar_i)`` (no arrivals during the service).
"""
import dataclasses
import logging
import math
from typing import List, Optional, Tuple

import numpy as np

from queuelab.checks import QueuelabError, is_stable, require_stable
from queuelab.config import default_config
from queuelab.model.spec import ModelSpec

logger = logging.getLogger(__name__)

LST = default_config['lst']


def default_thetas(theta_min: float = None, theta_max: float = None, points: int = None) -> np.ndarray:
    return np.geomspace(LST['theta_min'] if theta_min is None else theta_min,
                        LST['theta_max'] if theta_max is None else theta_max,
                        int(LST['points'] if points is None else points))


@dataclasses.dataclass(frozen=True, eq=False)
class LstGrid:
    thetas: np.ndarray

    #: g[i, n] = g_i(thetas[n])
    g: np.ndarray

    iterations: np.ndarray
    residual: np.ndarray

    class NonConvergence(QueuelabError):
        """Raised with the last iterate ``g`` (same layout as :attr:`LstGrid.g`)."""

        def __init__(self, message, residual=None, g=None):
            super().__init__(message)
            self.residual = residual
            self.g = g

    @property
    def k(self) -> int:
        return self.g.shape[0]

    @property
    def non_increasing(self) -> bool:
        return bool(np.all(np.diff(self.g, axis=1) <= LST['monotone_slack']))

    def at(self, theta: float) -> np.ndarray:
        """Values at one grid point; ``theta`` must be on the grid."""
        index = int(np.argmin(np.abs(self.thetas - theta)))
        if not math.isclose(self.thetas[index], theta, rel_tol=1e-12):
            raise KeyError(f'theta = {theta} is not on the grid')
        return self.g[:, index]

    def csv_header(self) -> List[str]:
        return ['theta', *(f'g_{i + 1}' for i in range(self.k)), 'residual']

    def csv_rows(self) -> List[list]:
        return [[theta, *self.g[:, n].tolist(), self.residual[n]] for n, theta in enumerate(self.thetas)]


def _psi_matrix(spec: ModelSpec, arguments: np.ndarray) -> np.ndarray:
    return np.vstack([np.atleast_1d(spec.psi(i, arguments[i])) for i in range(spec.k)])


def _fixed_point_map(spec: ModelSpec, thetas: np.ndarray, g: np.ndarray) -> np.ndarray:
    arguments = thetas[None, :] + spec.lambda_bar[:, None] - spec.lam @ g
    return _psi_matrix(spec, np.maximum(arguments, 0.0))


def solve_fixed_point(spec: ModelSpec, thetas=None, tol: float = None, max_iter: int = None) -> LstGrid:
    """Monotone iteration on every grid point; theta = 0 is reported as the limit value 1."""
    require_stable(spec, strict=False)
    thetas = default_thetas() if thetas is None else np.asarray(thetas, dtype=float)
    tol = LST['tol'] if tol is None else tol
    max_iter = int(LST['max_iter'] if max_iter is None else max_iter)

    if thetas.ndim != 1 or np.any(thetas < 0) or np.any(np.diff(thetas) <= 0):
        raise ValueError('thetas must be a strictly increasing grid of non-negative values')

    k, n = spec.k, len(thetas)
    g = np.ones((k, n))
    iterations = np.zeros(n, dtype=np.int64)
    active = thetas > 0

    if active.any():
        g[:, active] = _psi_matrix(spec, thetas[active][None, :] + spec.lambda_bar[:, None])

    while active.any():
        if iterations[active].max() >= max_iter:
            residual = np.max(np.abs(_fixed_point_map(spec, thetas[active], g[:, active]) - g[:, active]))
            raise LstGrid.NonConvergence(
                f'fixed point not reached after {max_iter} iterations at {int(active.sum())} grid points '
                f'(smallest theta {thetas[active].min():.3g}, residual {residual:.3g})', residual=float(residual),
                g=g.copy()
            )

        previous = g[:, active]
        current = _fixed_point_map(spec, thetas[active], previous)

        drop = float(np.max(previous - current))
        if drop > LST['monotone_slack']:
            raise LstGrid.NonConvergence(
                f'fixed-point iterates decreased by {drop:.3g} after {int(iterations[active].max())} iterations',
                residual=drop, g=g.copy()
            )

        g[:, active] = current
        iterations[active] += 1

        change = np.max(np.abs(current - previous), axis=0)
        still = change >= tol
        indices = np.flatnonzero(active)
        active[indices[~still]] = False

    residual = np.zeros(n)
    positive = thetas > 0
    if positive.any():
        residual[positive] = np.max(np.abs(_fixed_point_map(spec, thetas[positive], g[:, positive])
                                           - g[:, positive]), axis=0)

    logger.debug('LST grid of %d points solved, at most %d iterations', n, int(iterations.max(initial=0)))
    return LstGrid(thetas=thetas, g=g, iterations=iterations, residual=residual)


def closed_form_k2(mu1, mu2, lam12, lam21, theta) -> Tuple[np.ndarray, np.ndarray]:
    """Explicit busy-period transforms for two exponential classes with no self-feedback."""
    theta = np.asarray(theta, dtype=float)
    product = (mu1 + theta + lam12) * (mu2 + theta + lam21)
    delta = (mu1 * mu2 + lam12 * lam21 + theta ** 2 + theta * (mu1 + mu2 + lam12 + lam21)) ** 2 \
        - 4 * mu1 * mu2 * lam12 * lam21
    if np.any(delta < 0):
        raise ValueError('negative discriminant')

    root = np.sqrt(delta)
    g1 = (mu1 * lam21 - mu2 * lam12 + product - root) / (2 * lam21 * (mu1 + theta + lam12))
    g2 = (-mu1 * lam21 + mu2 * lam12 + product - root) / (2 * lam12 * (mu2 + theta + lam21))
    return g1, g2


def conditional_lst(spec: ModelSpec, i: int, s: float, grid: LstGrid) -> np.ndarray:
    """g_(i,s)(theta): transform of a class-i busy period whose first service is exactly ``s``."""
    exponent = grid.thetas + spec.lambda_bar[i] - spec.lam[i] @ grid.g
    return np.exp(-s * exponent)


def initial_state_lst(spec: ModelSpec, x, grid: LstGrid) -> np.ndarray:
    """g_x(theta) = prod_i g_i(theta)^x_i for an initial population ``x``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.k,):
        raise ValueError(f'x must have {spec.k} entries')
    return np.prod(grid.g ** x[:, None], axis=0)


@dataclasses.dataclass(frozen=True, eq=False)
class MomentEstimate:
    mean_busy: np.ndarray
    error: np.ndarray
    steps: np.ndarray

    def to_dict(self) -> dict:
        return {'meanBusy': self.mean_busy.tolist(), 'error': self.error.tolist(), 'steps': self.steps.tolist()}


@is_stable()
def moments_from_lst(spec: ModelSpec, step: float = None, levels: Optional[int] = None) -> MomentEstimate:
    """E B_i = -g_i'(0+) from one-sided differences (1 - g(h)) / h at halving steps, Richardson-extrapolated."""
    step = LST['moment_step'] if step is None else step
    levels = int(LST['moment_levels'] if levels is None else levels)

    steps = step / 2.0 ** np.arange(levels)
    grid = solve_fixed_point(spec, thetas=steps[::-1])
    slopes = (1 - grid.g[:, ::-1]) / steps[None, :]

    # the difference quotient has an error series in powers of h
    table = [slopes[:, index] for index in range(levels)]
    previous = table[-1]
    for order in range(1, levels):
        factor = 2.0 ** order
        previous = table[-1]
        table = [(factor * table[index + 1] - table[index]) / (factor - 1) for index in range(len(table) - 1)]

    best = table[-1]
    error = np.abs(best - previous) if levels > 1 else np.full(spec.k, math.nan)
    return MomentEstimate(mean_busy=best, error=error, steps=steps)
