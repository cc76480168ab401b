"""Backward induction: empirical Bellman targets, stagewise KRR fits, pricing.

Stage models approximate the value functions V_t for t = 0..T-1 (V_T is the
known terminal payoff). All randomness is drawn from counter-based substreams
keyed by (seed, purpose, stage, point index), so target generation is
order-independent under parallel execution.
"""

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .dynamics import (
    CEMETERY,
    INNER,
    OUTER,
    GbmParams,
    gbm_step,
    is_cemetery,
    sample_mu_t,
    substream,
    transition,
)
from .kernels import KernelSpec, KrrModel
from .payoffs import PayoffSpec, payoff_batch, payoff_value, stage_reward

# Above this training size the stage fit switches to Nystrom automatically.
NYSTROM_AUTO_THRESHOLD = 2000

STACK_FORMAT_VERSION = 1


@dataclass(frozen=True)
class StageConfig:
    n: int
    M: int
    lam: float
    kernel: KernelSpec
    beta: float = 1.0
    nystrom_m: int | None = None
    clip_override: float | None = None

    def __post_init__(self):
        if self.n < 1 or self.M < 1:
            raise ValueError("n and M must be at least 1")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if not 0 < self.beta <= 1:
            raise ValueError("beta must lie in (0, 1]")


@dataclass
class ValueFunctionStack:
    payoff: PayoffSpec
    models: list  # KrrModel per stage t = 0..T-1
    params: GbmParams
    horizon: int
    timings: list = field(default_factory=list)  # seconds per fitted stage

    def stage_fn(self, t):
        """Batch evaluator of the stage-t value approximant (payoff at t=T)."""
        if t == self.horizon:
            return lambda X: payoff_batch(self.payoff, X)
        model = self.models[t]
        return lambda X: kernels.clipped_predict_batch(model, X)

    def value_at(self, t, x):
        """Stage-t value at one state; 0 at the cemetery."""
        if is_cemetery(x):
            return 0.0
        return float(self.stage_fn(t)(np.atleast_2d(np.asarray(x, dtype=np.float64)))[0])


def discount(params):
    return math.exp(-params.r * params.dt)


def continuation_value(x, next_value, M, params, rng):
    """Discounted M-sample MC estimate of the held-position value at x."""
    if M < 1:
        raise ValueError("M must be at least 1")
    z = rng.standard_normal((M, params.d))
    xn = gbm_step(np.asarray(x, dtype=np.float64), params, z)
    return discount(params) * float(np.mean(next_value(xn)))


def empirical_bellman(x, t, f_next, controls, rewards, M, params, rng):
    """max over controls of reward plus discounted M-sample continuation.

    ``rewards`` is a callable (x, u, t) -> real; ``f_next`` evaluates batches
    of next states and is taken to vanish at the cemetery.
    """
    controls = list(controls)
    if not controls:
        raise ValueError("control set must be nonempty")
    if is_cemetery(x):
        return 0.0
    z = rng.standard_normal((M, params.d))
    disc = discount(params)
    best = -math.inf
    for u in controls:
        nxt = [transition(x, u, params, z[j]) for j in range(M)]
        real = [s for s in nxt if not is_cemetery(s)]
        cont = 0.0
        if real:
            cont = float(np.sum(f_next(np.asarray(real)))) / M
        best = max(best, rewards(x, u, t) + disc * cont)
    return best


def _target_block(idx, X, t, M, next_fn, params, payoff, seed):
    d = params.d
    Z = np.empty((len(idx), M, d))
    for j, i in enumerate(idx):
        Z[j] = substream(seed, INNER, t, i).standard_normal((M, d))
    xn = gbm_step(X[idx][:, None, :], params, Z)
    cont = discount(params) * next_fn(xn.reshape(-1, d)).reshape(len(idx), M).mean(axis=1)
    return np.maximum(payoff_batch(payoff, X[idx]), cont)


def generate_stage_data(t, cfg, next_fn, params, payoff, seed, n_jobs=1):
    """Supervised pairs (X, y) at stage t: y_i = max(exercise, MC continuation)."""
    X = sample_mu_t(params, t, cfg.n, substream(seed, OUTER, t))
    y = np.empty(cfg.n)
    idx = np.arange(cfg.n)
    if n_jobs <= 1:
        y[:] = _target_block(idx, X, t, cfg.M, next_fn, params, payoff, seed)
        return X, y
    blocks = np.array_split(idx, n_jobs * 4)
    blocks = [b for b in blocks if len(b)]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        futs = [
            (b, pool.submit(_target_block, b, X, t, cfg.M, next_fn, params, payoff, seed))
            for b in blocks
        ]
        for b, fut in futs:
            y[b] = fut.result()
    return X, y


def _fit_stage(X, y, cfg, seed, t):
    clip = cfg.clip_override if cfg.clip_override is not None else float(np.max(np.abs(y)))
    if clip == 0.0 or np.ptp(y) == 0.0:
        return kernels.constant_model(y[0], cfg.kernel, cfg.lam, clip_bound=max(clip, 1e-300))
    m = cfg.nystrom_m
    if m is None and cfg.n > NYSTROM_AUTO_THRESHOLD:
        m = NYSTROM_AUTO_THRESHOLD
    if m is not None and m < cfg.n:
        model = kernels.nystrom_fit(X, y, cfg.lam, cfg.kernel, m, substream(seed, INNER, t, 1 << 32))
    else:
        model = kernels.krr_fit(X, y, cfg.lam, cfg.kernel)
    return kernels.with_clip(model, clip)


def backward_pass(run, n_jobs=1):
    """Fit the full stack of stage value models for t = T-1 down to 0.

    Stage 0 is a point mass at x0, so its "fit" is the exact degenerate KRR
    solution at a single atom: the shrunk target mean, stored as a constant
    model. A fresh large-MC re-evaluation is done by ``price_at_origin``.
    """
    params, payoff, T, seed = run.params, run.payoff, run.steps, run.seed
    models = [None] * T
    timings = [0.0] * T
    next_fn = lambda X: payoff_batch(payoff, X)
    for t in range(T - 1, -1, -1):
        cfg = run.stages[t]
        tic = time.perf_counter()
        try:
            X, y = generate_stage_data(t, cfg, next_fn, params, payoff, seed, n_jobs)
            if t == 0:
                clip = float(np.max(np.abs(y)))
                value = float(np.mean(y)) / (1.0 + cfg.lam)
                model = kernels.constant_model(value, cfg.kernel, cfg.lam,
                                               clip_bound=max(clip, 1e-300))
            else:
                model = _fit_stage(X, y, cfg, seed, t)
        except kernels.FitError as exc:
            raise kernels.FitError(f"stage {t}: {exc}") from exc
        timings[t] = time.perf_counter() - tic
        models[t] = model
        next_fn = (lambda m: (lambda Xb: kernels.clipped_predict_batch(m, Xb)))(model)
    return ValueFunctionStack(payoff=payoff, models=models, params=params,
                              horizon=T, timings=timings)


def price_at_origin(stack, eval_M, rng):
    """Time-0 Bellman value at x0 with a fresh eval_M-sample continuation."""
    params = stack.params
    z = rng.standard_normal((eval_M, params.d))
    xn = gbm_step(params.x0, params, z)
    cont = discount(params) * float(np.mean(stack.stage_fn(1)(xn)))
    return max(payoff_value(stack.payoff, params.x0), cont)


def policy_lower_bound(stack, paths, rng, inner_m=64):
    """Average discounted payoff of the stack-induced stopping rule.

    Any feasible rule prices at or below the optimum in expectation, so this
    is a downward-biased cross-check. Exercise at the first t where the
    immediate payoff is positive and at least the (small inner MC) estimated
    continuation.
    """
    if paths < 1:
        raise ValueError("paths must be at least 1")
    params, payoff, T = stack.params, stack.payoff, stack.horizon
    d, dt, r = params.d, params.dt, params.r
    disc = discount(stack.params)
    x = np.tile(params.x0, (paths, 1))
    alive = np.arange(paths)
    value = np.zeros(paths)
    for t in range(T):
        if alive.size == 0:
            break
        C = payoff_batch(payoff, x)
        z = rng.standard_normal((x.shape[0], inner_m, d))
        xn = gbm_step(x[:, None, :], params, z)
        cont = disc * stack.stage_fn(t + 1)(xn.reshape(-1, d)).reshape(-1, inner_m).mean(axis=1)
        stop = (C > 0) & (C >= cont)
        value[alive[stop]] = C[stop] * math.exp(-r * t * dt)
        keep = ~stop
        alive = alive[keep]
        x = x[keep]
        if alive.size:
            x = gbm_step(x, params, rng.standard_normal((alive.size, d)))
    if alive.size:
        value[alive] = payoff_batch(payoff, x) * math.exp(-r * T * dt)
    stderr = float(value.std(ddof=1) / math.sqrt(paths)) if paths > 1 else 0.0
    return float(value.mean()), stderr


def schedule_hyperparams(n, beta, c_lambda=1.0, c_m=1.0):
    """Rate-optimal stage settings: lambda ~ n^{-1/(beta+1)}, M ~ n^{beta/(beta+1)}."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0 < beta <= 1:
        raise ValueError("beta must lie in (0, 1]")
    lam = c_lambda * n ** (-1.0 / (beta + 1.0))
    M = math.ceil(c_m * n ** (beta / (beta + 1.0)))
    return lam, M


def contraction_check(f, g, t, n_eval, M, params, payoff, rng):
    """Empirical Bellman Lipschitz bound on shared inner noise.

    Returns (lhs, rhs): lhs is the L2(mu_t) distance of the two empirical
    Bellman images; rhs is exp(-r dt) times the L2 distance of f and g over
    the shared propagated samples. lhs <= rhs pathwise.
    """
    X = sample_mu_t(params, t, n_eval, rng)
    Z = rng.standard_normal((n_eval, M, params.d))
    xn = gbm_step(X[:, None, :], params, Z).reshape(-1, params.d)
    fv = f(xn).reshape(n_eval, M)
    gv = g(xn).reshape(n_eval, M)
    disc = discount(params)
    C = payoff_batch(payoff, X)
    tf = np.maximum(C, disc * fv.mean(axis=1))
    tg = np.maximum(C, disc * gv.mean(axis=1))
    lhs = float(np.sqrt(np.mean((tf - tg) ** 2)))
    rhs = disc * float(np.sqrt(np.mean((fv - gv) ** 2)))
    return lhs, rhs


def save_stack(stack, path):
    """Versioned npz serialization; predictions round-trip bit-exactly."""
    header = {
        "version": STACK_FORMAT_VERSION,
        "d": stack.params.d,
        "T": stack.horizon,
        "dt": stack.params.dt,
        "r": stack.params.r,
        "payoff_kind": stack.payoff.kind,
        "strike": stack.payoff.strike,
    }
    arrays = {
        "header": np.frombuffer(json.dumps(header).encode(), dtype=np.uint8),
        "sigma": stack.params.sigma,
        "rho": stack.params.rho,
        "x0": stack.params.x0,
        "timings": np.asarray(stack.timings),
    }
    for t, m in enumerate(stack.models):
        arrays[f"centers_{t}"] = m.centers
        arrays[f"coef_{t}"] = m.coefficients
        arrays[f"meta_{t}"] = np.array([
            m.kernel.lengthscale,
            m.lam,
            m.clip_bound if m.clip_bound is not None else np.nan,
            m.constant if m.constant is not None else np.nan,
            1.0 if m.constant is not None else 0.0,
        ])
    np.savez(path, **arrays)


def load_stack(path):
    data = np.load(path)
    header = json.loads(bytes(data["header"]).decode())
    if header["version"] != STACK_FORMAT_VERSION:
        raise ValueError(f"unsupported stack format version {header['version']}")
    params = GbmParams(d=header["d"], r=header["r"], sigma=data["sigma"],
                       rho=data["rho"], x0=data["x0"], dt=header["dt"])
    payoff = PayoffSpec(kind=header["payoff_kind"], strike=header["strike"])
    models = []
    for t in range(header["T"]):
        ls, lam, clip, const, is_const = data[f"meta_{t}"]
        spec = KernelSpec(lengthscale=float(ls))
        models.append(KrrModel(
            centers=data[f"centers_{t}"],
            coefficients=data[f"coef_{t}"],
            kernel=spec,
            lam=float(lam),
            clip_bound=None if np.isnan(clip) else float(clip),
            constant=float(const) if is_const == 1.0 else None,
        ))
    return ValueFunctionStack(payoff=payoff, models=models, params=params,
                              horizon=header["T"], timings=list(data["timings"]))
