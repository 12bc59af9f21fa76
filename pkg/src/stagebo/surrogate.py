"""Gaussian-process regression with a Matern-5/2 ARD kernel.

One independent GP is fitted per output (objective or constraint). Targets
are standardized to zero mean / unit variance before fitting; posterior
queries and sampled paths are returned in the original units. Inputs are
expected in the unit hypercube (the optimization loop normalizes them), and
lengthscale bounds are interpreted in those normalized units.

Posterior draws use random Fourier features: the Matern-5/2 spectral measure
is a multivariate Student-t with 5 degrees of freedom, and the feature
weights are conditioned on the data by weight-space Bayesian linear
regression (Matheron update), so a path is a cheap deterministic function.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize

from .exceptions import DataError, NumericalError

LENGTHSCALE_BOUNDS = (1e-3, 10.0)
SIGNAL_BOUNDS = (1e-3, 10.0)
NOISE_BOUNDS = (1e-6, 1e-1)
N_RESTARTS = 8
JITTER_START = 1e-3
JITTER_MAX = 1e-1
SQRT5 = np.sqrt(5.0)


@dataclass(frozen=True)
class GpModel:
    """A fitted per-output surrogate. Immutable; safe for concurrent reads."""

    lengthscales: np.ndarray
    signal_variance: float
    noise_variance: float
    y_mean: float
    y_std: float
    train_x: np.ndarray
    alpha: np.ndarray
    chol: np.ndarray
    jitter: float

    @property
    def n_train(self) -> int:
        return self.train_x.shape[0]


@dataclass(frozen=True)
class SampledPath:
    """One approximate posterior draw, evaluable at arbitrary batches."""

    feature_frequencies: np.ndarray
    feature_phases: np.ndarray
    feature_weights: np.ndarray
    feature_scale: float
    y_mean: float
    y_std: float

    def __call__(self, xs: np.ndarray) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        phi = self.feature_scale * np.cos(
            xs @ self.feature_frequencies.T + self.feature_phases
        )
        return self.y_mean + self.y_std * (phi @ self.feature_weights)


def matern52(
    xa: np.ndarray, xb: np.ndarray, lengthscales: np.ndarray, signal_variance: float
) -> np.ndarray:
    """Matern-5/2 ARD kernel matrix between two point sets."""
    xa = np.atleast_2d(np.asarray(xa, dtype=float))
    xb = np.atleast_2d(np.asarray(xb, dtype=float))
    diff = (xa[:, None, :] - xb[None, :, :]) / lengthscales
    r = np.sqrt(np.sum(diff**2, axis=2))
    return signal_variance * (1.0 + SQRT5 * r + (5.0 / 3.0) * r**2) * np.exp(-SQRT5 * r)


def _chol_with_jitter(mat: np.ndarray) -> tuple[np.ndarray, float]:
    """Cholesky factor with escalating diagonal jitter (0, 1e-3, ..., 1e-1)."""
    jitter = 0.0
    eye = np.eye(mat.shape[0])
    while True:
        try:
            return np.linalg.cholesky(mat + jitter * eye), jitter
        except np.linalg.LinAlgError:
            jitter = JITTER_START if jitter == 0.0 else jitter * 10.0
            if jitter > JITTER_MAX * (1.0 + 1e-12):
                raise NumericalError(
                    f"Cholesky failed even with jitter {JITTER_MAX}"
                ) from None


def build_model(
    xs: np.ndarray,
    ys: np.ndarray,
    lengthscales: np.ndarray,
    signal_variance: float,
    noise_variance: float,
) -> GpModel:
    """Assemble a model with given hyperparameters (no optimization).

    Standardizes the targets and caches the Cholesky factor of
    K + noise * I. An empty dataset is allowed; the model then represents
    the prior.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    ys = np.asarray(ys, dtype=float).ravel()
    n = xs.shape[0]
    if n != ys.shape[0]:
        raise DataError("xs and ys lengths differ")
    lengthscales = np.asarray(lengthscales, dtype=float) * np.ones(xs.shape[1])
    if n == 0:
        return GpModel(
            lengthscales=lengthscales,
            signal_variance=float(signal_variance),
            noise_variance=float(noise_variance),
            y_mean=0.0,
            y_std=1.0,
            train_x=xs,
            alpha=np.zeros(0),
            chol=np.zeros((0, 0)),
            jitter=0.0,
        )
    if not np.all(np.isfinite(ys)):
        raise DataError("targets contain non-finite values")
    y_mean = float(np.mean(ys))
    y_std = float(np.std(ys))
    if y_std < 1e-12:
        y_std = 1.0
    y_standardized = (ys - y_mean) / y_std
    kmat = matern52(xs, xs, lengthscales, signal_variance)
    kmat[np.diag_indices(n)] += noise_variance
    chol, jitter = _chol_with_jitter(kmat)
    alpha = cho_solve((chol, True), y_standardized)
    return GpModel(
        lengthscales=lengthscales,
        signal_variance=float(signal_variance),
        noise_variance=float(noise_variance),
        y_mean=y_mean,
        y_std=y_std,
        train_x=xs,
        alpha=alpha,
        chol=chol,
        jitter=jitter,
    )


def _nll_and_grad(log_params, xs, y_standardized):
    """Negative MLL and its gradient w.r.t. log hyperparameters."""
    n, d = xs.shape
    ls = np.exp(log_params[:d])
    sig = np.exp(log_params[d])
    noise = np.exp(log_params[d + 1])

    diff = xs[:, None, :] - xs[None, :, :]
    scaled2 = (diff / ls) ** 2
    r = np.sqrt(np.sum(scaled2, axis=2))
    decay = np.exp(-SQRT5 * r)
    kf = sig * (1.0 + SQRT5 * r + (5.0 / 3.0) * r**2) * decay
    kmat = kf + noise * np.eye(n)
    try:
        chol = np.linalg.cholesky(kmat)
    except np.linalg.LinAlgError:
        return 1e25, np.zeros_like(log_params)

    alpha = cho_solve((chol, True), y_standardized)
    nll = (
        0.5 * float(y_standardized @ alpha)
        + float(np.sum(np.log(np.diag(chol))))
        + 0.5 * n * np.log(2.0 * np.pi)
    )
    kinv = cho_solve((chol, True), np.eye(n))
    w = np.outer(alpha, alpha) - kinv  # dMLL/dtheta = 0.5 tr(W dK/dtheta)

    grad = np.empty_like(log_params)
    ls_common = (5.0 / 3.0) * sig * (1.0 + SQRT5 * r) * decay
    for i in range(d):
        dk = ls_common * scaled2[:, :, i]  # dK/dlog(ls_i), the r terms cancel
        grad[i] = -0.5 * float(np.sum(w * dk))
    grad[d] = -0.5 * float(np.sum(w * kf))
    grad[d + 1] = -0.5 * noise * float(np.trace(w))
    return nll, grad


def _restart_initials(d: int, seed: int) -> np.ndarray:
    """Log-space starting points for the multi-start MLL ascent."""
    rng = np.random.default_rng(seed)
    inits = np.empty((N_RESTARTS, d + 2))
    inits[0] = np.concatenate([np.log(0.5 * np.ones(d)), [0.0, np.log(1e-2)]])
    lo = np.concatenate(
        [np.full(d, np.log(LENGTHSCALE_BOUNDS[0])), [np.log(SIGNAL_BOUNDS[0]), np.log(NOISE_BOUNDS[0])]]
    )
    hi = np.concatenate(
        [np.full(d, np.log(LENGTHSCALE_BOUNDS[1])), [np.log(SIGNAL_BOUNDS[1]), np.log(NOISE_BOUNDS[1])]]
    )
    inits[1:] = rng.uniform(lo, hi, size=(N_RESTARTS - 1, d + 2))
    return inits


def fit(xs: np.ndarray, ys: np.ndarray, seed: int) -> GpModel:
    """Fit hyperparameters by multi-start gradient ascent on the MLL.

    The returned model's marginal likelihood is at least that of every
    multi-start initialization (each local ascent never accepts a worse
    point, and the best restart wins).

    Raises:
        DataError: Non-finite targets or shape mismatch.
        NumericalError: Factorization fails after jitter escalation.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    ys = np.asarray(ys, dtype=float).ravel()
    if xs.shape[0] < 1:
        raise DataError("need at least one observation")
    if xs.shape[0] != ys.shape[0]:
        raise DataError("xs and ys lengths differ")
    if not np.all(np.isfinite(ys)) or not np.all(np.isfinite(xs)):
        raise DataError("training data contains non-finite values")

    d = xs.shape[1]
    y_std = float(np.std(ys))
    if y_std < 1e-12:
        y_std = 1.0
    y_standardized = (ys - float(np.mean(ys))) / y_std

    log_bounds = (
        [(np.log(LENGTHSCALE_BOUNDS[0]), np.log(LENGTHSCALE_BOUNDS[1]))] * d
        + [(np.log(SIGNAL_BOUNDS[0]), np.log(SIGNAL_BOUNDS[1]))]
        + [(np.log(NOISE_BOUNDS[0]), np.log(NOISE_BOUNDS[1]))]
    )
    best_params = None
    best_nll = np.inf
    for start in _restart_initials(d, seed):
        init_nll, _ = _nll_and_grad(start, xs, y_standardized)
        res = minimize(
            _nll_and_grad,
            start,
            args=(xs, y_standardized),
            method="L-BFGS-B",
            jac=True,
            bounds=log_bounds,
            options={"maxiter": 200},
        )
        cand, cand_nll = res.x, res.fun
        if not np.isfinite(cand_nll) or cand_nll > init_nll:
            cand, cand_nll = start, init_nll
        if cand_nll < best_nll:
            best_nll = cand_nll
            best_params = cand
    if best_params is None or not np.isfinite(best_nll):
        raise NumericalError("marginal likelihood not finite at any restart")

    ls = np.exp(best_params[:d])
    return build_model(xs, ys, ls, float(np.exp(best_params[d])), float(np.exp(best_params[d + 1])))


def log_marginal_likelihood(model: GpModel, xs: np.ndarray, ys: np.ndarray) -> float:
    """Gaussian MLL of the data under the model (standardized targets)."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    ys = np.asarray(ys, dtype=float).ravel()
    n = xs.shape[0]
    if n != ys.shape[0] or xs.shape[1] != model.train_x.shape[1]:
        raise DataError("data dimensions do not match the model")
    y_standardized = (ys - model.y_mean) / model.y_std
    kmat = matern52(xs, xs, model.lengthscales, model.signal_variance)
    kmat[np.diag_indices(n)] += model.noise_variance + model.jitter
    try:
        chol = np.linalg.cholesky(kmat)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("Cholesky failed in MLL evaluation") from exc
    alpha = cho_solve((chol, True), y_standardized)
    return float(
        -0.5 * (y_standardized @ alpha)
        - np.sum(np.log(np.diag(chol)))
        - 0.5 * n * np.log(2.0 * np.pi)
    )


def posterior(model: GpModel, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact GP predictive mean and variance, in original target units.

    The variance is the latent-function variance (no observation noise),
    clamped at zero against round-off.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    if model.n_train == 0:
        mean = np.full(xs.shape[0], model.y_mean)
        var = np.full(xs.shape[0], model.signal_variance * model.y_std**2)
        return mean, var
    kstar = matern52(xs, model.train_x, model.lengthscales, model.signal_variance)
    mean_std = kstar @ model.alpha
    v = solve_triangular(model.chol, kstar.T, lower=True)
    var_std = np.clip(model.signal_variance - np.sum(v**2, axis=0), 0.0, None)
    return model.y_mean + model.y_std * mean_std, model.y_std**2 * var_std


def sample_path(model: GpModel, num_features: int = 512, seed: int = 0) -> SampledPath:
    """Draw one posterior path via random Fourier features.

    Deterministic given (model, seed). With an empty model this is a prior
    draw; otherwise the feature weights are conditioned on the training data.
    """
    if num_features < 64:
        raise ValueError("num_features must be at least 64")
    rng = np.random.default_rng(seed)
    d = model.train_x.shape[1]
    # Matern-5/2 spectral sample: Student-t frequencies with 5 dof.
    normal = rng.standard_normal((num_features, d))
    chi2 = rng.chisquare(5.0, size=(num_features, 1))
    freqs = normal * np.sqrt(5.0 / chi2) / model.lengthscales
    phases = rng.uniform(0.0, 2.0 * np.pi, size=num_features)
    scale = np.sqrt(2.0 * model.signal_variance / num_features)
    weights = rng.standard_normal(num_features)

    n = model.n_train
    if n > 0:
        noise = max(model.noise_variance, 1e-12)
        phi = scale * np.cos(model.train_x @ freqs.T + phases)
        eps = rng.standard_normal(n) * np.sqrt(noise)
        # Standardized targets, reconstructed from the cached factorization.
        y_standardized = model.chol @ (model.chol.T @ model.alpha)
        gram = phi @ phi.T + (noise + model.jitter) * np.eye(n)
        chol, _ = _chol_with_jitter(gram)
        resid = y_standardized - phi @ weights - eps
        weights = weights + phi.T @ cho_solve((chol, True), resid)

    return SampledPath(
        feature_frequencies=freqs,
        feature_phases=phases,
        feature_weights=weights,
        feature_scale=float(scale),
        y_mean=model.y_mean,
        y_std=model.y_std,
    )
