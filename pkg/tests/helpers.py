import numpy as np

from uiobank.bank import observer_update
from uiobank.model import step_plant


def p_norm_vec(v, P):
    return float(np.sqrt(v @ P @ v))


def observer_errors(spec, model, x0, e0, steps, rng, a_u=None, input_scale=5.0):
    """Run one observer against the plant with clean sensors; returns e(0..steps)."""
    x = np.array(x0, dtype=float)
    xhat = x + e0
    y = model.C @ x
    errors = [xhat - x]
    for k in range(steps):
        u = rng.uniform(-input_scale, input_scale, model.n_u)
        attack = np.zeros(model.n_u) if a_u is None else a_u[k]
        x_next, y_next = step_plant(model, x, u, attack, np.zeros(model.n_y))
        xhat = observer_update(spec, model, xhat, u, y, y_next)
        x, y = x_next, y_next
        errors.append(xhat - x)
    return errors
