"""Online learners that pick betting fractions.

Three learners are provided:

* :class:`UniOns` -- scalar Online Newton Step on ``[-1/2, 1/2]``.  The state
  arrays may carry any shape, so one object can run many independent scalar
  learners (for example ``(runs, k)`` streams) in lock step.
* :class:`MvOns` -- Online Newton Step over the l1 ball of radius 1/2 in
  ``R^k`` with the projection measured in the accumulated curvature norm.
* :class:`SimplexFtrl` / :class:`Direction` -- entropic FTRL on the
  probability simplex and its reduction to the l1 unit ball through the
  doubled outcome ``(z, -z)``.

All learners follow the same protocol: read the bet with ``bet()`` (or
``weights()`` / ``step()``) before the outcome is revealed, then feed the
outcome with ``update``.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InvariantError, ProjectionError, StreamDataError

#: ONS step constant 2 / (2 - ln 3) used for every learner.
STEP_SCALE = 2.0 / (2.0 - math.log(3.0))

#: Radius of the betting set for both scalar and vector ONS.
BET_RADIUS = 0.5

# Sherman-Morrison drift control for MvOns.
_INVERSE_REFRESH = 1000


def check_outcomes(z, name="z"):
    """Return ``z`` as a float array after checking ``|z| <= 1`` elementwise."""
    z = np.asarray(z, dtype=float)
    bad = ~(np.abs(z) <= 1.0)
    if bad.any():
        idx = np.argwhere(bad)[0]
        value = z[tuple(idx)] if z.ndim else float(z)
        col = int(idx[-1]) + 1 if z.ndim else None
        raise StreamDataError(f"{name} value {value!r} outside [-1, 1]", column=col)
    return z


class UniOns:
    """Scalar ONS betting fraction(s).

    Parameters
    ----------
    shape : tuple of int, default=()
        Shape of the bank of independent learners.  ``()`` gives a single
        learner whose ``bet()`` is a 0-d array.
    """

    def __init__(self, shape=()):
        self.lam = np.zeros(shape)
        self.grad_sq_sum = np.zeros(shape)

    def bet(self):
        """Current betting fraction(s) lambda_t (a copy)."""
        return self.lam.copy()

    def update(self, z):
        """Observe outcome(s) ``z`` in [-1, 1] and move the bet."""
        z = check_outcomes(z)
        # nu is the derivative of -ln(1 + lam * z) at the current bet.
        nu = -z / (1.0 + self.lam * z)
        self.grad_sq_sum = self.grad_sq_sum + nu * nu
        step = self.lam - STEP_SCALE * nu / (1.0 + self.grad_sq_sum)
        self.lam = np.clip(step, -BET_RADIUS, BET_RADIUS)

    def copy(self):
        other = UniOns.__new__(UniOns)
        other.lam = self.lam.copy()
        other.grad_sq_sum = self.grad_sq_sum.copy()
        return other


def uni_ons_bet(state: UniOns):
    return state.bet()


def uni_ons_update(state: UniOns, z):
    state.update(z)
    return state


# --------------------------------------------------------------------------
# Projection onto {||v||_1 <= r} in the norm induced by an SPD matrix.
# --------------------------------------------------------------------------


def _soft(x, thresh):
    if x > thresh:
        return x - thresh
    if x < -thresh:
        return x + thresh
    return 0.0


def _lasso_cd(H, b, mu, v, Hv, tol, budget):
    """Coordinate descent on ``v'Hv - 2b'v + mu ||v||_1``; updates v, Hv in place.

    Returns the number of sweeps used.
    """
    k = v.shape[0]
    diag = np.diag(H)
    half_mu = 0.5 * mu
    sweeps = 0
    while sweeps < budget:
        sweeps += 1
        biggest = 0.0
        for i in range(k):
            old = v[i]
            rho = b[i] - (Hv[i] - diag[i] * old)
            new = _soft(rho, half_mu) / diag[i]
            delta = new - old
            if delta != 0.0:
                v[i] = new
                Hv += delta * H[:, i]
                biggest = max(biggest, abs(delta))
        if biggest <= tol:
            break
    return sweeps


def _active_set_solution(H, b, r, v):
    """Solve the projection exactly assuming the support and signs of ``v``.

    Returns ``None`` when the guessed pattern fails the optimality checks.
    """
    support = np.flatnonzero(v)
    if support.size == 0:
        return None
    signs = np.sign(v[support])
    Hss = H[np.ix_(support, support)]
    a = np.linalg.solve(Hss, b[support])
    c = np.linalg.solve(Hss, signs)
    denom = signs @ c
    if denom <= 0:
        return None
    half_mu = (signs @ a - r) / denom
    if half_mu < 0:
        return None
    vs = a - half_mu * c
    if np.any(np.sign(vs) != signs):
        return None
    out = np.zeros_like(v)
    out[support] = vs
    grad = 2.0 * (H @ out - b)
    off = np.ones(v.shape[0], dtype=bool)
    off[support] = False
    if np.any(np.abs(grad[off]) > 2.0 * half_mu * (1.0 + 1e-9) + 1e-12):
        return None
    return out


def _shrink_into_ball(v, r):
    norm = np.abs(v).sum()
    if norm > r:
        v = v * (r / norm)
        while np.abs(v).sum() > r:
            v = v * (1.0 - 4.0 * np.finfo(float).eps)
    return v


def projection_gap(v, y, H, r):
    """Frank-Wolfe duality gap of ``v`` for the H-weighted l1-ball projection."""
    grad = 2.0 * (H @ (v - y))
    return float(grad @ v + r * np.max(np.abs(grad)))


def project_l1_h(y, H, r=BET_RADIUS, *, x0=None, tol=1e-10, max_sweeps=10_000):
    """Project ``y`` onto ``{||v||_1 <= r}`` under the norm ``(v-y)' H (v-y)``.

    The constrained problem is solved through its penalized form
    ``min (v-y)'H(v-y) + mu ||v||_1``: coordinate descent with exact scalar
    minimisation solves each penalized problem, a bracketed root find picks
    the multiplier ``mu`` with ``||v(mu)||_1 = r``, and a final active-set
    solve on the detected support removes the residual error.

    Parameters
    ----------
    y : ndarray of shape (k,)
    H : ndarray of shape (k, k)
        Symmetric positive definite weight.
    r : float
        Ball radius, ``r > 0``.
    x0 : ndarray, optional
        Warm start, typically the previous iterate.
    tol : float
        Frank-Wolfe duality gap target, relative to ``max(1, max(diag(H)))``.
    max_sweeps : int
        Cap on the total number of coordinate sweeps.

    Returns
    -------
    ndarray of shape (k,)
        Feasible minimiser (``||v||_1 <= r`` holds exactly in floating point).

    Raises
    ------
    ProjectionError
        If the gap target is not met within ``max_sweeps``.
    """
    y = np.asarray(y, dtype=float)
    H = np.asarray(H, dtype=float)
    if r <= 0:
        raise ValueError("radius must be positive")
    if np.abs(y).sum() <= r:
        return y.copy()
    k = y.shape[0]
    if k == 1:
        # the weighted projection onto an interval is the clip for any h > 0
        return np.clip(y, -r, r)

    b = H @ y
    scale = max(1.0, float(np.max(np.diag(H))))
    cd_tol = 1e-15 * max(1.0, float(np.max(np.abs(y))))

    # the support and signs rarely change between ONS steps, so an exact
    # solve on the warm start's pattern usually settles it outright
    for guess in (x0, y):
        if guess is None:
            continue
        exact = _active_set_solution(H, b, r, np.asarray(guess, dtype=float))
        if exact is not None:
            exact = _shrink_into_ball(exact, r)
            if projection_gap(exact, y, H, r) <= tol * scale:
                return exact

    v = np.zeros(k) if x0 is None else np.array(x0, dtype=float)
    Hv = H @ v
    used = 0

    def l1_excess(mu):
        nonlocal used
        used += _lasso_cd(H, b, mu, v, Hv, cd_tol, max(1, max_sweeps - used))
        return np.abs(v).sum() - r

    lo, hi = 0.0, 2.0 * float(np.max(np.abs(b)))
    # ||v(mu)||_1 is piecewise linear and decreasing: false position with a
    # bisection step every third iteration
    f_lo, f_hi = np.abs(y).sum() - r, -r
    for it in range(200):
        if used >= max_sweeps:
            break
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
        mid = lo - f_lo * (hi - lo) / (f_hi - f_lo)
        if not (lo < mid < hi) or it % 3 == 2:
            mid = 0.5 * (lo + hi)
        f_mid = l1_excess(mid)
        if f_mid == 0.0:
            lo = hi = mid
            break
        if f_mid > 0:
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
        exact = _active_set_solution(H, b, r, v)
        if exact is not None:
            candidate = _shrink_into_ball(exact, r)
            if projection_gap(candidate, y, H, r) <= tol * scale:
                return candidate

    candidate = _shrink_into_ball(v.copy(), r)
    exact = _active_set_solution(H, b, r, v)
    if exact is not None:
        polished = _shrink_into_ball(exact, r)
        if projection_gap(polished, y, H, r) < projection_gap(candidate, y, H, r):
            candidate = polished
    gap = projection_gap(candidate, y, H, r)
    if gap > tol * scale:
        raise ProjectionError(
            f"l1 projection did not reach gap {tol:g} (gap {gap:.3e}) after {used} sweeps",
            condition=float(np.linalg.cond(H)),
        )
    return candidate


class MvOns:
    """Vector ONS over the l1 ball of radius 1/2.

    ``hessian`` starts at the identity and accumulates ``nu nu'`` where
    ``nu = -z / (1 + <lambda, z>)``; ``hessian_inv`` follows it by
    Sherman-Morrison updates and is recomputed from scratch every 1000 steps.
    """

    def __init__(self, k):
        if k < 1:
            raise ValueError("k must be positive")
        self.k = k
        self.lam = np.zeros(k)
        self.hessian = np.eye(k)
        self.hessian_inv = np.eye(k)
        self.radius = BET_RADIUS
        self.steps = 0

    def bet(self):
        return self.lam.copy()

    def payoff(self, z):
        return 1.0 + float(self.lam @ z)

    def update(self, z, payoff_value=None):
        z = check_outcomes(z)
        if z.shape != (self.k,):
            raise StreamDataError(f"expected {self.k} outcomes, got shape {z.shape}")
        if payoff_value is None:
            payoff_value = self.payoff(z)
        if not payoff_value > 0:
            raise InvariantError(f"non-positive payoff {payoff_value!r}: bet left the l1 ball")
        nu = -z / payoff_value
        self.hessian += np.outer(nu, nu)
        h = self.hessian_inv @ nu
        self.hessian_inv -= np.outer(h, h) / (1.0 + nu @ h)
        self.steps += 1
        if self.steps % _INVERSE_REFRESH == 0:
            self.hessian_inv = np.linalg.inv(self.hessian)
        self.hessian_inv = 0.5 * (self.hessian_inv + self.hessian_inv.T)
        y = self.lam - STEP_SCALE * (self.hessian_inv @ nu)
        self.lam = project_l1_h(y, self.hessian, self.radius, x0=self.lam)

    def inverse_residual(self):
        """``max |H^-1 H - I|``; a debugging aid for the incremental inverse."""
        return float(np.max(np.abs(self.hessian_inv @ self.hessian - np.eye(self.k))))

    def copy(self):
        other = MvOns.__new__(MvOns)
        other.k = self.k
        other.lam = self.lam.copy()
        other.hessian = self.hessian.copy()
        other.hessian_inv = self.hessian_inv.copy()
        other.radius = self.radius
        other.steps = self.steps
        return other


def mv_ons_update(state: MvOns, z, payoff_value=None):
    state.update(z, payoff_value)
    return state


class SimplexFtrl:
    """Entropic FTRL on the ``d``-simplex for linear gains.

    The round-``j`` iterate has the closed form
    ``v_i ∝ exp(eta_j * G_i)`` with ``eta_j = sqrt(ln d / j)`` and ``G`` the
    sum of the gain vectors from rounds before ``j``.  ``grad_sum`` may carry
    leading batch dimensions; all batch members share ``step_count``.
    """

    def __init__(self, dim, batch_shape=()):
        if dim < 1:
            raise ValueError("simplex dimension must be at least 1")
        self.dim = dim
        self.grad_sum = np.zeros(tuple(batch_shape) + (dim,))
        self.step_count = 1

    def learning_rate(self):
        return math.sqrt(math.log(self.dim) / self.step_count)

    def weights(self):
        if self.dim == 1:
            return np.ones_like(self.grad_sum)
        x = self.learning_rate() * self.grad_sum
        x = x - x.max(axis=-1, keepdims=True)
        e = np.exp(x)
        return e / e.sum(axis=-1, keepdims=True)

    def update(self, g):
        g = np.asarray(g, dtype=float)
        if g.shape[-1] != self.dim:
            raise StreamDataError(f"expected gain of length {self.dim}, got {g.shape[-1]}")
        self.grad_sum = self.grad_sum + g
        self.step_count += 1


def ftrl_simplex_step(state: SimplexFtrl):
    if state.step_count < 1:
        raise ValueError("step_count must be >= 1")
    return state.weights()


class Direction:
    """Direction ``u_t`` in the l1 unit ball from FTRL on ``(z, -z)``."""

    def __init__(self, k, batch_shape=()):
        self.k = k
        self.inner = SimplexFtrl(2 * k, batch_shape)

    def step(self, z):
        """Emit ``u_t`` (computed before seeing ``z``), then absorb ``z``."""
        z = check_outcomes(z)
        if z.shape[-1] != self.k:
            raise StreamDataError(f"expected {self.k} outcomes, got {z.shape[-1]}")
        v = self.inner.weights()
        u = v[..., : self.k] - v[..., self.k :]
        self.inner.update(np.concatenate([z, -z], axis=-1))
        return u


def direction_step(state: Direction, z):
    return state.step(z), state
