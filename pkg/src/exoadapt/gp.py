"""Exact Gaussian-process regression over the (assistance, payload) plane.

Squared-exponential (RBF) kernel with one lengthscale per axis:

    k(x, x') = sigma2 * exp(-sum_d (x_d - x'_d)^2 / (2 * l_d^2))

Inputs are rescaled to the unit square before fitting so the lengthscale
bounds mean the same thing on both axes. Hyperparameters maximize the log
marginal likelihood (L-BFGS-B in log-space with seeded random restarts).
The posterior mean and its partial derivative along the assistance axis
are closed-form, so downstream root-finding never needs finite differences.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.optimize import minimize

from .errors import ConditioningError, InsufficientDataError

JITTER = 1e-8
LENGTHSCALE_BOUNDS = (0.05, 10.0)   # per normalized axis
SIGNAL_VAR_BOUNDS = (1e-4, 1e4)
NOISE_VAR_BOUNDS = (1e-8, 1.0)
DEFAULT_RESTARTS = 5

# physical extent of the optimization space: assistance in [0,1], payload kg
DEFAULT_DOMAIN = ((0.0, 1.0), (5.0, 15.0))


def _standardize(X: np.ndarray, domain) -> np.ndarray:
    lo = np.array([d[0] for d in domain], dtype=float)
    hi = np.array([d[1] for d in domain], dtype=float)
    return (X - lo) / (hi - lo)


def _sqdists(Z: np.ndarray, Zq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d0 = (Zq[:, 0, None] - Z[None, :, 0]) ** 2
    d1 = (Zq[:, 1, None] - Z[None, :, 1]) ** 2
    return d0, d1


class GaussianProcess:
    """Posterior over f given noisy 2-D observations, RBF kernel, constant
    mean fixed at the training-target average."""

    def __init__(self, X, y, signal_var, lengthscales, noise_var, domain=DEFAULT_DOMAIN):
        self.X = np.asarray(X, dtype=float).reshape(-1, 2)
        self.y = np.asarray(y, dtype=float).ravel()
        if self.X.shape[0] != self.y.size:
            raise InsufficientDataError("X and y must have matching lengths")
        self.domain = tuple((float(lo), float(hi)) for lo, hi in domain)
        self.signal_var = float(signal_var)
        self.lengthscales = (float(lengthscales[0]), float(lengthscales[1]))
        self.noise_var = float(noise_var)
        self._Z = _standardize(self.X, self.domain)
        self._y_mean = float(self.y.mean())
        self._factorize()

    # -- fitting -----------------------------------------------------------

    @classmethod
    def fit(
        cls,
        X,
        y,
        noise: float | str = "ml",
        domain=DEFAULT_DOMAIN,
        seed: int = 0,
        n_restarts: int = DEFAULT_RESTARTS,
    ) -> "GaussianProcess":
        """Fit hyperparameters by maximum marginal likelihood.

        noise="ml" optimizes the noise variance alongside the kernel
        parameters; a float fixes it (0.0 means jitter-only, i.e. a
        noise-free interpolating posterior).
        """
        X = np.asarray(X, dtype=float).reshape(-1, 2)
        y = np.asarray(y, dtype=float).ravel()
        if X.shape[0] < 2:
            raise InsufficientDataError("need at least 2 samples to fit a surface")
        Z = _standardize(X, domain)
        optimize_noise = noise == "ml"
        fixed_noise = 0.0 if optimize_noise else float(noise)

        y_var = float(np.var(y))
        if y_var == 0.0:
            # constant targets: residuals vanish, posterior mean is the
            # constant regardless of hyperparameters
            return cls(X, y, 1.0, (1.0, 1.0), fixed_noise, domain)

        lb = [np.log(SIGNAL_VAR_BOUNDS[0]), np.log(LENGTHSCALE_BOUNDS[0]), np.log(LENGTHSCALE_BOUNDS[0])]
        ub = [np.log(SIGNAL_VAR_BOUNDS[1]), np.log(LENGTHSCALE_BOUNDS[1]), np.log(LENGTHSCALE_BOUNDS[1])]
        if optimize_noise:
            lb.append(np.log(NOISE_VAR_BOUNDS[0]))
            ub.append(np.log(NOISE_VAR_BOUNDS[1]))
        bounds = list(zip(lb, ub))

        r = y - y.mean()
        d0, d1 = _sqdists(Z, Z)
        n = Z.shape[0]

        def objective(theta):
            s2 = np.exp(theta[0])
            l0 = np.exp(theta[1])
            l1 = np.exp(theta[2])
            nv = np.exp(theta[3]) if optimize_noise else fixed_noise
            R = np.exp(-0.5 * (d0 / l0**2 + d1 / l1**2))
            K = s2 * R + (nv + JITTER) * np.eye(n)
            try:
                c, low = cho_factor(K, lower=True)
            except LinAlgError:
                return 1e25, np.zeros_like(theta)
            alpha = cho_solve((c, low), r)
            nll = 0.5 * float(r @ alpha) + float(np.log(np.diag(c)).sum()) + 0.5 * n * np.log(2 * np.pi)
            Kinv = cho_solve((c, low), np.eye(n))
            W = np.outer(alpha, alpha) - Kinv
            sR = s2 * R
            grad = [
                -0.5 * float(np.sum(W * sR)),
                -0.5 * float(np.sum(W * (sR * (d0 / l0**2)))),
                -0.5 * float(np.sum(W * (sR * (d1 / l1**2)))),
            ]
            if optimize_noise:
                grad.append(-0.5 * nv * float(np.trace(W)))
            return nll, np.asarray(grad)

        starts = [np.log([min(max(y_var, SIGNAL_VAR_BOUNDS[0]), SIGNAL_VAR_BOUNDS[1]), 0.3, 0.3])]
        if optimize_noise:
            starts[0] = np.append(starts[0], np.log(1e-4))
        rng = np.random.default_rng(seed)
        for _ in range(n_restarts):
            starts.append(rng.uniform(lb, ub))

        best = None
        for x0 in starts:
            res = minimize(objective, x0, jac=True, method="L-BFGS-B", bounds=bounds)
            if best is None or res.fun < best.fun:
                best = res
        theta = best.x
        nv = float(np.exp(theta[3])) if optimize_noise else fixed_noise
        return cls(X, y, float(np.exp(theta[0])), (float(np.exp(theta[1])), float(np.exp(theta[2]))), nv, domain)

    def _kernel(self, Zq: np.ndarray) -> np.ndarray:
        d0, d1 = _sqdists(self._Z, Zq)
        l0, l1 = self.lengthscales
        return self.signal_var * np.exp(-0.5 * (d0 / l0**2 + d1 / l1**2))

    def _factorize(self):
        n = self._Z.shape[0]
        K = self._kernel(self._Z) + (self.noise_var + JITTER) * np.eye(n)
        try:
            c, low = cho_factor(K, lower=True)
        except LinAlgError as exc:
            raise ConditioningError(
                f"kernel matrix singular after jitter {JITTER} (n={n})"
            ) from exc
        self._chol = (c, low)
        self._alpha = cho_solve(self._chol, self.y - self._y_mean)

    # -- evaluation --------------------------------------------------------

    def _query(self, assist, payload):
        a = np.asarray(assist, dtype=float)
        p = np.asarray(payload, dtype=float)
        scalar = a.ndim == 0 and p.ndim == 0
        a, p = np.broadcast_arrays(np.atleast_1d(a), np.atleast_1d(p))
        Xq = np.column_stack([a.ravel(), p.ravel()])
        return _standardize(Xq, self.domain), (None if scalar else a.shape)

    def mean(self, assist, payload):
        """Posterior mean at (assistance, payload) points (broadcasting)."""
        Zq, shape = self._query(assist, payload)
        m = self._y_mean + self._kernel(Zq) @ self._alpha
        return float(m[0]) if shape is None else m.reshape(shape)

    def dmean_dassist(self, assist, payload):
        """Closed-form partial derivative of the posterior mean along the
        assistance axis, in physical (unscaled) units."""
        Zq, shape = self._query(assist, payload)
        Kq = self._kernel(Zq)
        l0 = self.lengthscales[0]
        diff = Zq[:, 0, None] - self._Z[None, :, 0]
        scale = 1.0 / (self.domain[0][1] - self.domain[0][0])
        d = (Kq * (-diff / l0**2)) @ self._alpha * scale
        return float(d[0]) if shape is None else d.reshape(shape)

    def log_marginal_likelihood(self) -> float:
        r = self.y - self._y_mean
        c = self._chol[0]
        n = r.size
        return float(-0.5 * r @ self._alpha - np.log(np.diag(c)).sum() - 0.5 * n * np.log(2 * np.pi))

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "X": self.X.tolist(),
            "y": self.y.tolist(),
            "signal_var": self.signal_var,
            "lengthscales": list(self.lengthscales),
            "noise_var": self.noise_var,
            "domain": [list(d) for d in self.domain],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GaussianProcess":
        return cls(
            np.asarray(data["X"], dtype=float),
            np.asarray(data["y"], dtype=float),
            data["signal_var"],
            tuple(data["lengthscales"]),
            data["noise_var"],
            tuple(tuple(d) for d in data["domain"]),
        )
