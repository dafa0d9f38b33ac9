# User-facing strings, kept together so the CLI and the library word things the same way.

__all__ = (
    'INFINITE_MEAN',
    'NO_RESTART',
    'NEGATIVE_RATE',
    'NON_FINITE_RATE',
    'NON_SQUARE_LAMBDA',
    'DIMENSION_MISMATCH',
    'VERDICT_STABLE',
    'VERDICT_BOUNDARY',
    'VERDICT_BOUNDARY_REDUCIBLE',
    'VERDICT_UNSTABLE',
    'VERDICT_UNSTABLE_UNPROVEN',
    'BUSY_PERIOD_SCALING_NOTE',
    'OFFSPRING_CONVENTION_NOTE',
    'INTERNAL_ERROR_MSG',
)

INFINITE_MEAN = 'infinite mean service time'

NO_RESTART = 'system cannot restart from empty (every lambda0 rate is zero)'

NEGATIVE_RATE = '{name} is negative ({value:g})'

NON_FINITE_RATE = '{name} must be finite'

NON_SQUARE_LAMBDA = 'lambda must be a square K x K matrix'

DIMENSION_MISMATCH = '{what} has {got} entries but the model has K = {k} classes'

VERDICT_STABLE = (
    'rho(M) < 1: the fluid model drains from any initial level under every non-idling policy '
    '(Lyapunov function e^T (I - H^T)^-1 W) and busy periods have finite mean.'
)

VERDICT_BOUNDARY = (
    'rho(M) = 1 within tolerance and M is irreducible: the fluid model is weakly stable '
    '(an empty fluid stays empty); busy periods end with probability one but have infinite mean.'
)

VERDICT_BOUNDARY_REDUCIBLE = (
    'rho(M) = 1 within tolerance but M is reducible: the weak-stability argument needs an '
    'irreducible M, so only the branching result (busy periods end with probability one) applies.'
)

VERDICT_UNSTABLE = (
    'rho(M) > 1 and every row of M has a positive entry: the fluid model is weakly unstable '
    '(it leaves the empty state) and busy periods are infinite with positive probability.'
)

VERDICT_UNSTABLE_UNPROVEN = (
    'rho(M) > 1 but some row of M is zero: the fluid instability argument does not apply; '
    'busy periods are still infinite with positive probability.'
)

BUSY_PERIOD_SCALING_NOTE = (
    'B_(i;z)/z is compared against both beta_i and 1 + beta_i; the service requirement z itself '
    'is part of the busy period, so 1 + beta_i is the limit used for jump-size conversions.'
)

OFFSPRING_CONVENTION_NOTE = (
    'offspring counts use the parent service S_i (M_ij = lambda_ij / mu_i), not S_j.'
)

# hope this never happens
INTERNAL_ERROR_MSG = 'Sorry, an internal error has occurred. [{ray}] The full trace is in the log.'
