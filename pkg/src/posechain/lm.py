"""Levenberg-Marquardt over a manifold-valued state.

The caller supplies ``evaluate(state, jacobian) -> (r, J)`` and
``retract(state, delta) -> state``; the solver only ever sees tangent
increments, so states can hold quaternions or anything else.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import SingularNormalEquations

# Residual RMS below which a fit is treated as exact and the loop stops.
EXACT_FIT_RMS = 1e-10
MAX_DAMPING = 1e16


@dataclass
class LMOptions:
    max_iter: int = 100
    initial_damping: float = 1e-4
    damping_up: float = 10.0
    damping_down: float = 10.0
    rtol: float = 1e-12


@dataclass
class LMResult:
    state: Any
    cost: float
    initial_cost: float
    iterations: int
    converged: bool
    reason: str
    cost_history: list = field(default_factory=list)


def _cost(r: np.ndarray) -> float:
    return 0.5 * float(r @ r)


def levenberg_marquardt(
    evaluate: Callable[[Any, bool], tuple[np.ndarray, np.ndarray | None]],
    retract: Callable[[Any, np.ndarray], Any],
    state: Any,
    options: LMOptions | None = None,
) -> LMResult:
    """Minimize ``0.5 * |r(state)|²``.

    Damping is Marquardt-scaled (``λ · diag(JᵀJ)``), multiplied on rejection
    and divided on acceptance. Stops on a relative cost decrease below
    ``rtol``, an exact fit, or when no damping level yields a decrease.

    Raises:
        SingularNormalEquations: the damped system cannot be solved.
    """
    opt = options or LMOptions()
    r, J = evaluate(state, True)
    cost = _cost(r)
    initial_cost = cost
    history = [cost]
    exact = 0.5 * r.size * EXACT_FIT_RMS**2
    lam = opt.initial_damping

    it = 0
    while True:
        if cost <= exact:
            return LMResult(state, cost, initial_cost, it, True, "exact fit", history)
        if it >= opt.max_iter:
            return LMResult(state, cost, initial_cost, it, False, "max iterations", history)
        it += 1

        A = J.T @ J
        g = J.T @ r
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(g))):
            raise SingularNormalEquations("non-finite normal equations")
        d = np.diag(A).copy()
        dmax = float(d.max(initial=0.0))
        if dmax <= 0.0:
            raise SingularNormalEquations("Jacobian is identically zero")
        d = np.maximum(d, 1e-15 * dmax)

        while True:
            try:
                L = np.linalg.cholesky(A + lam * np.diag(d))
            except np.linalg.LinAlgError:
                lam *= opt.damping_up
                if lam > MAX_DAMPING:
                    raise SingularNormalEquations("normal equations are not positive definite") from None
                continue
            step = -np.linalg.solve(L.T, np.linalg.solve(L, g))
            candidate = retract(state, step)
            r_new, _ = evaluate(candidate, False)
            cost_new = _cost(r_new) if np.all(np.isfinite(r_new)) else np.inf
            if cost_new < cost:
                break
            lam *= opt.damping_up
            if lam > MAX_DAMPING:
                # no decrease at any damping: stationary to working precision
                return LMResult(state, cost, initial_cost, it, True, "stalled at minimum", history)

        rel = (cost - cost_new) / cost
        state = candidate
        cost = cost_new
        history.append(cost)
        lam = max(lam / opt.damping_down, 1e-300)
        if rel < opt.rtol:
            return LMResult(state, cost, initial_cost, it, True, "relative cost change", history)
        r, J = evaluate(state, True)
