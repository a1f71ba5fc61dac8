"""Python front end for the rholab C++ core.

Structured arguments (generators, functionals, measures, grids, configs) are
plain dicts with the same layout as the CLI config files.
"""

import json as _json

from . import _rholab
from ._rholab import InfeasibleError, NumericalError, ValidationError

__version__ = "0.1.0"

QUADRATIC = {"variant": "quadratic", "c": 1.0}


def _dump(x):
    return _json.dumps(x if x is not None else {})


def run(config, output_dir, seed=None):
    """Run an experiment config; returns exit_code, message, files, manifest, report_csv."""
    return _json.loads(_rholab.run(_dump(config), str(output_dir), seed))


def resolve_config(config):
    return _json.loads(_rholab.resolve_config(_dump(config)))


def config_hash(config):
    """Hash of the resolved config (defaults filled in)."""
    return _rholab.config_hash(_dump(resolve_config(config)))


def compare(report_a, report_b, tolerance=0.0, se_multiple=0.0):
    return _json.loads(_rholab.compare(str(report_a), str(report_b), tolerance, se_multiple))


def check_ti(generator):
    return _json.loads(_rholab.check_ti(_dump(generator)))


def growth_exponent(generator):
    return _rholab.growth_exponent(_dump(generator))


def eval_g(generator, q, t=0.0):
    return _rholab.eval_g(_dump(generator), t, q)


def pde_value(terminal, generator=QUADRATIC, viscosity=1.0, grid=None, x=0.0):
    """v(0, x) for v_t + (viscosity/2) v_xx + g*(v_x) = 0, v(1) = terminal."""
    return _rholab.pde_value(_dump(terminal), _dump(generator), viscosity, _dump(grid), x)


def hopf_lax(terminal, generator=QUADRATIC, t=0.0, x=0.0, y_range=(-6.0, 6.0), y_step=1e-5):
    return _rholab.hopf_lax(_dump(terminal), _dump(generator), t, x, y_range[0], y_range[1], y_step)


def vanishing_viscosity_sweep(terminal, generator=QUADRATIC, n_list=(1, 2, 4, 8, 16, 32, 64), grid=None,
                              y_step=1e-5, x0=0.0):
    return _json.loads(_rholab.vanishing_viscosity_sweep(_dump(terminal), _dump(generator), list(n_list),
                                                         _dump(grid), y_step, x0))


def action(times, values, generator=QUADRATIC):
    return _rholab.action(list(times), list(values), _dump(generator))


def maximize_schilder(functional, generator=QUADRATIC, knots=64, restarts=8, seed=1, options=None):
    return _json.loads(_rholab.maximize_schilder(_dump(functional), _dump(generator), knots, restarts, seed,
                                                 _dump(options)))


def log_mean_exp(functional, n=1.0, steps=64, paths=100000, seed=1):
    """(1/n) log E exp(n F(W / sqrt(n))) as (value, standard error)."""
    return _rholab.log_mean_exp(_dump(functional), n, steps, paths, seed)


def cramer_average(functional, n=1, steps=64, paths=100000, seed=1):
    return _rholab.cramer_average(_dump(functional), n, steps, paths, seed)


def girsanov_lower_bound(functional, control, generator=QUADRATIC, steps=64, paths=100000, seed=1):
    return _rholab.girsanov_lower_bound(_dump(functional), _dump(generator), _dump(control), steps, paths, seed)


def lsmc_y0(functional, generator=QUADRATIC, n=1.0, steps=32, paths=100000, seed=1, degree=3):
    return _rholab.lsmc_y0(_dump(functional), _dump(generator), n, steps, paths, seed, degree)


def bridge_moment_check(x=0.0, y=1.0, epsilon=1.0, delta=1.0, r=1.5, paths=100000, steps=1000, seed=1):
    return _json.loads(_rholab.bridge_moment_check(x, y, epsilon, delta, r, paths, steps, seed))


def bridge_constant(r):
    return _rholab.bridge_constant(r)


def iterate_L(functional, n, generator=QUADRATIC, grid=None):
    """functional: {"phi": ..., "Phi": ...}."""
    return _rholab.iterate_L(_dump(functional), _dump(generator), n, _dump(grid))


def mean_field_limit(functional, generator=QUADRATIC, grids=None, t=0.0):
    """Mean-field limit; t > 0 gives the conditional limit at time t."""
    return _json.loads(_rholab.mean_field_limit(_dump(functional), _dump(generator), _dump(grids), t))


def ot_oracle(mu, nu, generator=QUADRATIC):
    return _rholab.ot_oracle(_dump(mu), _dump(nu), _dump(generator))


def small_noise_sweep(mu, nu, eps, generator=QUADRATIC, mollified=True, grid_step=0.01, options=None):
    return _json.loads(_rholab.small_noise_sweep(_dump(mu), _dump(nu), _dump(generator), list(eps), mollified,
                                                 grid_step, _dump(options)))
