"""
Initial value problems through the SCF decoupling.

An SCF splits into the pure ODE u' + Omega u = q1_bar and the pure DAE
N v' + v = q2_bar, with x = K [u; v] and q_bar = L q.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError
from scipy import integrate

from ..blockstruct import characteristics_from_nilpotent
from ..equivalence import DaePair
from ..expr import MatrixFn
from ..models.params import NormalizeParams, SolveParams, StageName
from ..utils import sampling
from ..utils.exceptions import ConfigurationError, IntegrationError, StageMissingError
from .pipeline import PipelineResult

logger = logging.getLogger(__name__)


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray  # (len(t), m)
    xdot: np.ndarray
    u: np.ndarray  # (len(t), d)
    v: np.ndarray  # (len(t), a)
    residual: np.ndarray
    t0: float
    x0: np.ndarray

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residual, initial=0.0))


class FundamentalMatrix:
    """
    Dense solution K(t) of K' = (alpha I - Omega) K.

    Calling it returns the d x d matrix at t; `derivative` evaluates the
    right-hand side at the interpolated value.
    """

    def __init__(self, omega: MatrixFn, alpha: float, t0: float, pieces: List[Tuple[Tuple[float, float], object]]):
        self.omega = omega
        self.alpha = alpha
        self.t0 = t0
        self._pieces = pieces

    @property
    def d(self) -> int:
        return self.omega.rows

    def __call__(self, t: float) -> np.ndarray:
        if self.d == 0:
            return np.zeros((0, 0))
        for (lo, hi), dense in self._pieces:
            if lo <= t <= hi:
                return np.asarray(dense(t)).reshape(self.d, self.d)
        raise IntegrationError(f"t={t:.12g} lies outside the integrated range")

    def derivative(self, t: float) -> np.ndarray:
        return (self.alpha * np.eye(self.d) - self.omega(t)) @ self(t)

    def transformed_omega(self, t: float) -> np.ndarray:
        """K^-1 Omega K + K^-1 K' at t, which equals alpha I."""
        K = self(t)
        return np.linalg.solve(K, self.omega(t) @ K + self.derivative(t))


class Solver:
    def __init__(self, session):
        self.session = session

    @property
    def settings(self):
        return self.session.settings

    def solve_pure_dae(self, N: MatrixFn, q2: MatrixFn, mu: Optional[int] = None) -> MatrixFn:
        """
        The solution v of N v' + v = q2 as a matrix function.

        For constant N this is sum_{j<mu} (-1)^j N^j q2^(j). Otherwise v is
        obtained from mu passes of v <- q2 - N v', which reaches the same
        fixed point for strictly upper triangular N.
        """
        if N.rows == 0:
            return MatrixFn.zeros(0, 1)
        if N.is_constant():
            mu = mu or characteristics_from_nilpotent(N(0.0), self.settings.rank_tol).mu
            limit = self.settings.derivative_limit(mu)
            v = MatrixFn.zeros(N.rows, q2.cols)
            power = MatrixFn.identity(N.rows)
            for j in range(mu):
                term = power @ q2.derivative(j, max_order=limit)
                v = v + (term if j % 2 == 0 else -term)
                power = power @ N
            return self.session.normalize(v)
        mu = mu or N.rows
        v = q2
        for _ in range(mu):
            v = self.session.normalize(q2 - N @ v.derivative())
        return v

    def solve_ivp(
        self,
        result: PipelineResult,
        t0: float,
        u0: Sequence[float] = (),
        q: Optional[MatrixFn] = None,
        grid: int = 100,
        rtol: Optional[float] = None,
        atol: Optional[float] = None,
        method: str = "DOP853",
    ) -> Trajectory:
        """
        Solve E x' + F x = q with u(t0) = u0 on the working interval.

        Args:
            result: Pipeline result that reached step3 or step4
            t0: Initial time inside the interval
            u0: Initial value of the pure-ODE component, length d
            q: Right-hand side as an m x 1 matrix function, zero when omitted
            grid: Number of output points

        Returns:
            Trajectory on a closed uniform grid, with the consistent x(t0)

        Raises:
            StageMissingError: the pipeline did not reach the SCF
            IntegrationError: the integrator failed
        """
        try:
            params = SolveParams(
                t0=t0,
                u0=list(u0),
                grid=grid,
                rtol=rtol or self.settings.rtol,
                atol=atol or self.settings.atol,
                method=method,
            )
        except ValidationError as e:
            raise ConfigurationError(f"Invalid solve parameters: {e}")
        if not (result.has_stage(StageName.STEP3) or result.has_stage(StageName.STEP4)):
            raise StageMissingError(StageName.STEP3.value)
        return self.session._certify("solve_ivp", self._solve, result, params, q)

    def _solve(self, result: PipelineResult, params: SolveParams, q: Optional[MatrixFn]) -> Trajectory:
        original = result.original
        m, d = original.m, result.d
        interval = original.interval
        if not interval[0] <= params.t0 <= interval[1]:
            raise ConfigurationError(f"t0={params.t0} lies outside the interval {interval}")
        if len(params.u0) != d:
            raise ConfigurationError(f"u0 has {len(params.u0)} entries, the pure ODE has dimension {d}")
        q = q if q is not None else MatrixFn.zeros(m, 1)

        final = result.final
        T = result.composite()
        q_bar = self.session.normalize(T.L @ q)
        q1, q2 = q_bar.sub(0, d, 0, 1), q_bar.sub(d, m, 0, 1)
        omega = final.pair.omega
        v = self.solve_pure_dae(final.pair.E22, q2, result.spec.mu)
        v_dot = v.derivative()
        K, K_dot = T.K, T.K.derivative()

        def rhs(t, u):
            return -omega(t) @ u + q1(t)[:, 0]

        pieces = self._integrate(rhs, params, interval, d)

        def u_at(t):
            for (lo, hi), dense in pieces:
                if lo <= t <= hi:
                    return np.asarray(dense(t)).reshape(d)
            return np.asarray(params.u0, dtype=float)

        ts = sampling.closed_grid(interval, params.grid, original.avoid)
        xs, xdots, us, vs, residuals = [], [], [], [], []
        for t in ts:
            u = u_at(t)
            z = np.concatenate([u, v(t)[:, 0]])
            z_dot = np.concatenate([rhs(t, u), v_dot(t)[:, 0]])
            x = K(t) @ z
            x_dot = K_dot(t) @ z + K(t) @ z_dot
            xs.append(x)
            xdots.append(x_dot)
            us.append(u)
            vs.append(z[d:])
            residuals.append(self._residual_at(original, t, x, x_dot, q))

        t0 = params.t0
        x0 = K(t0) @ np.concatenate([np.asarray(params.u0, dtype=float), v(t0)[:, 0]])
        trajectory = Trajectory(
            t=np.asarray(ts),
            x=np.asarray(xs).reshape(len(ts), m),
            xdot=np.asarray(xdots).reshape(len(ts), m),
            u=np.asarray(us).reshape(len(ts), d),
            v=np.asarray(vs).reshape(len(ts), m - d),
            residual=np.asarray(residuals),
            t0=t0,
            x0=x0,
        )
        logger.info(f"solve_ivp: {len(ts)} points, max residual {trajectory.max_residual:.3g}")
        return trajectory

    def _integrate(self, rhs, params: SolveParams, interval, dim: int):
        """Dense solutions forward and backward from t0, as ((lo, hi), callable) pieces."""
        if dim == 0:
            return []
        pieces = []
        t0 = params.t0
        for end in (interval[1], interval[0]):
            if end == t0:
                continue
            solution = integrate.solve_ivp(
                rhs,
                (t0, end),
                np.asarray(params.u0, dtype=float),
                method=params.method,
                rtol=params.rtol,
                atol=params.atol,
                dense_output=True,
            )
            if not solution.success:
                raise IntegrationError(f"integration towards t={end:.6g} failed: {solution.message}")
            logger.debug(f"integrated to t={end:.6g} with {solution.nfev} evaluations")
            pieces.append(((min(t0, end), max(t0, end)), solution.sol))
        return pieces

    @staticmethod
    def _residual_at(pair: DaePair, t: float, x: np.ndarray, x_dot: np.ndarray, q: MatrixFn) -> float:
        error = pair.E(t) @ x_dot + pair.F(t) @ x - q(t)[:, 0]
        return float(np.max(np.abs(error), initial=0.0))

    def residual(self, pair: DaePair, trajectory: Trajectory, q: Optional[MatrixFn] = None) -> float:
        """max over the trajectory grid of |E x' + F x - q|_inf."""
        q = q if q is not None else MatrixFn.zeros(pair.m, 1)
        values = [
            self._residual_at(pair, t, x, x_dot, q)
            for t, x, x_dot in zip(trajectory.t, trajectory.x, trajectory.xdot)
        ]
        return float(max(values, default=0.0))

    def normalize_pure_ode(
        self,
        omega: MatrixFn,
        alpha: float,
        t0: float,
        interval: Tuple[float, float],
        K0init: Optional[Sequence[Sequence[float]]] = None,
        rtol: Optional[float] = None,
        atol: Optional[float] = None,
    ) -> FundamentalMatrix:
        """
        Integrate K' = (alpha I - Omega) K so that u = K u_hat turns the pure ODE into u_hat' + alpha u_hat = ...

        Raises:
            IntegrationError: the integrator failed or K became singular
        """
        try:
            params = NormalizeParams(
                alpha=alpha,
                t0=t0,
                K0init=[list(r) for r in K0init] if K0init is not None else None,
                rtol=rtol or self.settings.rtol,
                atol=atol or self.settings.atol,
            )
        except ValidationError as e:
            raise ConfigurationError(f"Invalid normalization parameters: {e}")
        d = omega.rows
        K_init = np.eye(d) if params.K0init is None else np.asarray(params.K0init, dtype=float)
        if K_init.shape != (d, d) or abs(np.linalg.det(K_init)) < self.settings.rank_tol:
            raise ConfigurationError(f"K0init must be a nonsingular {d}x{d} matrix")

        def rhs(t, k):
            return ((params.alpha * np.eye(d) - omega(t)) @ k.reshape(d, d)).ravel()

        solve = SolveParams(t0=params.t0, u0=K_init.ravel().tolist(), rtol=params.rtol, atol=params.atol)
        pieces = self.session._certify("normalize_pure_ode", self._integrate, rhs, solve, interval, d * d)
        fundamental = FundamentalMatrix(omega, params.alpha, params.t0, pieces)

        for t in sampling.closed_grid(interval, 50):
            if d and abs(np.linalg.det(fundamental(t))) < self.settings.rank_tol:
                raise IntegrationError(f"fundamental matrix is singular at t={t:.6g}")
        logger.info(f"normalize_pure_ode: alpha={params.alpha}, d={d}")
        return fundamental
