"""Correlated multi-asset GBM: one-step transitions and stage sampling.

RNG discipline: every consumer derives an independent Philox substream from
(root seed, purpose, stage, index) via ``substream``, so parallel generation
is reproducible regardless of execution order.
"""

from dataclasses import dataclass, field

import numpy as np

# substream purposes
OUTER = 0   # training inputs x_i ~ mu_t
INNER = 1   # inner MC for continuation values
EVAL = 2    # fresh time-0 evaluation
LOWER = 3   # lower-bound policy simulation
REP = 4     # per-repetition root
SELECT = 5  # lengthscale cross-validation


def substream(seed, *key):
    """Counter-based generator keyed by (seed, *key); order-independent."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, key)])))


class _Cemetery:
    __slots__ = ()

    def __repr__(self):
        return "CEMETERY"


#: Absorbing state for "option already exercised"; value functions are 0 here.
CEMETERY = _Cemetery()


def is_cemetery(x):
    return x is CEMETERY


@dataclass(frozen=True)
class GbmParams:
    d: int
    r: float
    sigma: np.ndarray
    rho: np.ndarray
    x0: np.ndarray
    dt: float
    corr_root: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=np.float64).ravel()
        rho = np.asarray(self.rho, dtype=np.float64)
        x0 = np.asarray(self.x0, dtype=np.float64).ravel()
        if sigma.shape != (self.d,) or x0.shape != (self.d,) or rho.shape != (self.d, self.d):
            raise ValueError("sigma, x0, rho must match asset count d")
        if not np.all(sigma > 0):
            raise ValueError("sigma must be positive")
        if not np.all(x0 > 0):
            raise ValueError("x0 must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not np.allclose(rho, rho.T) or not np.allclose(np.diag(rho), 1.0):
            raise ValueError("rho must be symmetric with unit diagonal")
        try:
            L = np.linalg.cholesky(rho)
        except np.linalg.LinAlgError:
            try:
                L = np.linalg.cholesky(rho + 1e-10 * np.eye(self.d))
            except np.linalg.LinAlgError as exc:
                raise ValueError("rho is not positive semidefinite") from exc
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "corr_root", L)


def correlate(z, params):
    """Apply the Cholesky root of rho: z (d,) or (m, d) -> correlated normals."""
    z = np.asarray(z, dtype=np.float64)
    return z @ params.corr_root.T


def gbm_step(x, params, z):
    """One log-Euler step; x and output strictly positive.

    Accepts x (d,) with z (d,) or (m, d), or x (m, d) with z (m, d).
    """
    x = np.asarray(x, dtype=np.float64)
    drift = (params.r - 0.5 * params.sigma**2) * params.dt
    shock = params.sigma * np.sqrt(params.dt) * correlate(z, params)
    return x * np.exp(drift + shock)


def transition(x, u, params, z):
    """Controlled transition: u=0 (exercise) or cemetery input absorbs."""
    if u not in (0, 1):
        raise ValueError("control must be 0 or 1")
    if is_cemetery(x) or u == 0:
        return CEMETERY
    return gbm_step(x, params, z)


def sample_mu_t(params, t, n, rng):
    """n draws of the stage-t state under the always-hold behavior policy."""
    if t < 0 or n < 1:
        raise ValueError("need t >= 0 and n >= 1")
    X = np.tile(params.x0, (n, 1))
    for _ in range(t):
        X = gbm_step(X, params, rng.standard_normal((n, params.d)))
    return X
