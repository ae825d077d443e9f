"""One-step time integrators with factorize-once effective operators."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NumericalError


def _factorize(matrix, label):
    try:
        return spla.splu(sp.csc_matrix(matrix))
    except RuntimeError as exc:
        raise NumericalError(f"factorization of {label} failed: {exc}") from exc


class ThetaStepper:
    """theta-method for M du/dt + A u = F; theta=1/2 is Crank-Nicolson.

    The effective matrix M + theta*dt*A is factorized once; every step is
    a pair of sparse mat-vecs plus one back-substitution.
    """

    def __init__(self, mass, stiffness, dt: float, theta: float = 0.5):
        if not 0.0 <= theta <= 1.0:
            raise NumericalError("theta must lie in [0, 1]")
        if dt <= 0.0:
            raise NumericalError("time step must be positive")
        self.mass = mass.tocsr()
        self.stiffness = stiffness.tocsr()
        self.dt = float(dt)
        self.theta = float(theta)
        self._lhs = _factorize(self.mass + self.theta * self.dt * self.stiffness,
                               "theta-method effective matrix")

    def step(self, u, f_old, f_new):
        dt, theta = self.dt, self.theta
        b = self.mass @ u - (1.0 - theta) * dt * (self.stiffness @ u) \
            + dt * (theta * f_new + (1.0 - theta) * f_old)
        return self._lhs.solve(b)


class NewmarkStepper:
    """Newmark-beta for M a + C v + K u = F, solved in acceleration form.

    With (beta, gamma) = (1/4, 1/2) this is the unconditionally stable
    trapezoidal member; the effective operator M + gamma*dt*C +
    beta*dt^2*K is factorized once.  A consistent initial acceleration is
    obtained from the governing equation at t = 0.
    """

    def __init__(self, mass, stiffness, dt: float, damping=None,
                 beta: float = 0.25, gamma: float = 0.5):
        if dt <= 0.0:
            raise NumericalError("time step must be positive")
        self.mass = mass.tocsr()
        self.stiffness = stiffness.tocsr()
        self.damping = None if damping is None else damping.tocsr()
        self.dt = float(dt)
        self.beta = float(beta)
        self.gamma = float(gamma)
        eff = self.mass + self.beta * self.dt ** 2 * self.stiffness
        if self.damping is not None:
            eff = eff + self.gamma * self.dt * self.damping
        self._eff = _factorize(eff, "Newmark effective matrix")
        self._mass_lu = _factorize(self.mass, "mass matrix")

    def initial_acceleration(self, u0, v0, f0):
        r = f0 - self.stiffness @ u0
        if self.damping is not None:
            r = r - self.damping @ v0
        return self._mass_lu.solve(r)

    def step(self, u, v, a, f_new):
        dt, beta, gamma = self.dt, self.beta, self.gamma
        u_pred = u + dt * v + dt * dt * (0.5 - beta) * a
        v_pred = v + dt * (1.0 - gamma) * a
        r = f_new - self.stiffness @ u_pred
        if self.damping is not None:
            r = r - self.damping @ v_pred
        a_new = self._eff.solve(r)
        u_new = u_pred + beta * dt * dt * a_new
        v_new = v_pred + gamma * dt * a_new
        return u_new, v_new, a_new
