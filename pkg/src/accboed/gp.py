"""Gaussian process regression with a cached Cholesky factorization.

Zero-mean GP over a box domain with squared-exponential or Matérn kernels.
Hyperparameters are fitted by multi-start gradient ascent on the log marginal
likelihood; predictions reuse the cached factorization, and conditioning on a
single hypothetical ("virtual") observation is a rank-one update of that
factorization rather than a refit.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

_LOG_2PI = math.log(2.0 * math.pi)

SQUARED_EXPONENTIAL = "squared_exponential"
MATERN = "matern"
_FAMILIES = (SQUARED_EXPONENTIAL, MATERN)
_MATERN_SMOOTHNESS = (0.5, 1.5, 2.5)

_JITTER_START = 1e-10  # relative to signal variance
_JITTER_MAX = 1e-4


class NumericalError(RuntimeError):
    """Factorization failed even at the maximum jitter level."""

    def __init__(self, message: str, jitter: float):
        self.jitter = jitter
        super().__init__(f"{message} (last jitter tried: {jitter:g})")


@dataclass(frozen=True)
class KernelSpec:
    """Stationary covariance function: family, scale, and smoothness."""

    family: str
    signal_variance: float
    lengthscale: float
    smoothness: float | None = None

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if not self.signal_variance > 0.0:
            raise ValueError("signal_variance must be positive")
        if not self.lengthscale > 0.0:
            raise ValueError("lengthscale must be positive")
        if self.family == MATERN and self.smoothness not in _MATERN_SMOOTHNESS:
            raise ValueError(
                f"Matern smoothness must be one of {_MATERN_SMOOTHNESS}, "
                f"got {self.smoothness!r}"
            )


@dataclass(frozen=True)
class Dataset:
    """Paired design inputs (n, dim) and scalar observations (n,)."""

    inputs: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        outputs = np.asarray(self.outputs, dtype=float).ravel()
        if inputs.shape[0] != outputs.shape[0]:
            raise ValueError(
                f"inputs rows ({inputs.shape[0]}) must match outputs length "
                f"({outputs.shape[0]})"
            )
        if inputs.shape[0] < 1:
            raise ValueError("dataset needs at least one observation")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "outputs", outputs)

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]


def append_observation(data: Dataset, x, y: float) -> Dataset:
    """New Dataset with one extra (x, y) pair appended."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    return Dataset(np.vstack([data.inputs, x]), np.append(data.outputs, y))


@dataclass(frozen=True)
class GaussianPrediction:
    """Joint Gaussian over query outputs: mean (m,) and covariance (m, m)."""

    mean: np.ndarray
    covariance: np.ndarray

    @property
    def variances(self) -> np.ndarray:
        return np.diag(self.covariance)


@dataclass(frozen=True)
class GpModel:
    """A fitted GP: hyperparameters, data, and the cached factorization.

    ``chol_factor`` is the lower Cholesky factor of K + noise_variance * I
    (plus ``jitter`` on the diagonal if the plain factorization failed);
    ``alpha`` solves (K + noise_variance I) alpha = centered outputs, and
    ``white_targets`` = chol_factor^{-1} centered outputs is kept around so
    rank-one constraint updates cost O(n^2).  ``mean_offset`` is added back
    to every predictive mean (the GP itself is zero-mean).
    """

    kernel: KernelSpec
    noise_variance: float
    data: Dataset
    chol_factor: np.ndarray
    alpha: np.ndarray
    mean_offset: float = 0.0
    jitter: float = 0.0
    fit_warning: bool = False
    white_targets: np.ndarray = field(default=None, repr=False)

    @property
    def centered_outputs(self) -> np.ndarray:
        return self.data.outputs - self.mean_offset


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------

def _kernel_from_dists(spec: KernelSpec, r: np.ndarray) -> np.ndarray:
    """Covariance as a function of Euclidean distance r >= 0."""
    s2, ell = spec.signal_variance, spec.lengthscale
    if spec.family == SQUARED_EXPONENTIAL:
        return s2 * np.exp(-0.5 * (r / ell) ** 2)
    nu = spec.smoothness
    if nu == 0.5:
        return s2 * np.exp(-r / ell)
    if nu == 1.5:
        a = math.sqrt(3.0) * r / ell
        return s2 * (1.0 + a) * np.exp(-a)
    a = math.sqrt(5.0) * r / ell
    return s2 * (1.0 + a + a * a / 3.0) * np.exp(-a)


def _kernel_grad_log_lengthscale(spec: KernelSpec, r: np.ndarray) -> np.ndarray:
    """d k(r) / d log(lengthscale)."""
    s2, ell = spec.signal_variance, spec.lengthscale
    if spec.family == SQUARED_EXPONENTIAL:
        return _kernel_from_dists(spec, r) * (r / ell) ** 2
    nu = spec.smoothness
    if nu == 0.5:
        a = r / ell
        return s2 * a * np.exp(-a)
    if nu == 1.5:
        a = math.sqrt(3.0) * r / ell
        return s2 * a * a * np.exp(-a)
    a = math.sqrt(5.0) * r / ell
    return s2 * (a * a / 3.0) * (1.0 + a) * np.exp(-a)


def kernel_matrix(spec: KernelSpec, x: np.ndarray, x2: np.ndarray | None = None) -> np.ndarray:
    """Cross-covariance matrix k(x_i, x2_j); symmetric Gram matrix if x2 is None."""
    x = np.atleast_2d(x)
    if x2 is None:
        r = cdist(x, x)
        k = _kernel_from_dists(spec, r)
        return 0.5 * (k + k.T)
    x2 = np.atleast_2d(x2)
    if x.shape[1] != x2.shape[1]:
        raise ValueError(f"dimension mismatch: {x.shape[1]} vs {x2.shape[1]}")
    return _kernel_from_dists(spec, cdist(x, x2))


def kernel_eval(spec: KernelSpec, x, x2) -> float:
    """Covariance between two single points."""
    x = np.asarray(x, dtype=float).ravel()
    x2 = np.asarray(x2, dtype=float).ravel()
    if x.shape != x2.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {x2.shape}")
    r = float(np.linalg.norm(x - x2))
    return float(_kernel_from_dists(spec, np.asarray(r)))


# ---------------------------------------------------------------------------
# Model construction and marginal likelihood
# ---------------------------------------------------------------------------

def _chol_with_jitter(a: np.ndarray, signal_variance: float):
    """Lower Cholesky of ``a``, escalating diagonal jitter on failure.

    Returns (factor, applied_jitter); raises NumericalError if even
    _JITTER_MAX * signal_variance does not make the matrix factorizable.
    """
    try:
        return cholesky(a, lower=True), 0.0
    except np.linalg.LinAlgError:
        pass
    jitter = _JITTER_START * signal_variance
    eye = np.eye(a.shape[0])
    while jitter <= _JITTER_MAX * signal_variance * (1.0 + 1e-12):
        try:
            return cholesky(a + jitter * eye, lower=True), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise NumericalError("covariance matrix is not positive definite", jitter / 10.0)


def build_gp(
    data: Dataset,
    kernel: KernelSpec,
    noise_variance: float,
    mean_offset: float = 0.0,
    fit_warning: bool = False,
) -> GpModel:
    """Assemble a GpModel with the given hyperparameters (no optimization)."""
    if noise_variance < 0.0:
        raise ValueError("noise_variance must be nonnegative")
    k = kernel_matrix(kernel, data.inputs)
    a = k + noise_variance * np.eye(data.n)
    chol, jitter = _chol_with_jitter(a, kernel.signal_variance)
    y_c = data.outputs - mean_offset
    white = solve_triangular(chol, y_c, lower=True)
    alpha = solve_triangular(chol.T, white, lower=False)
    return GpModel(
        kernel=kernel,
        noise_variance=noise_variance,
        data=data,
        chol_factor=chol,
        alpha=alpha,
        mean_offset=mean_offset,
        jitter=jitter,
        fit_warning=fit_warning,
        white_targets=white,
    )


def log_marginal_likelihood(model: GpModel) -> float:
    """Gaussian evidence of the training outputs under the model."""
    y_c = model.centered_outputs
    n = model.data.n
    data_term = -0.5 * float(y_c @ model.alpha)
    logdet_term = -float(np.sum(np.log(np.diag(model.chol_factor))))
    return data_term + logdet_term - 0.5 * n * _LOG_2PI


def _lml_value_and_grad(r: np.ndarray, y_c: np.ndarray, spec: KernelSpec, noise_variance: float):
    """LML and its gradient w.r.t. (log signal_variance, log lengthscale, log noise_variance).

    ``r`` is the precomputed training distance matrix.  Returns None when the
    covariance cannot be factorized at any admissible jitter.
    """
    n = y_c.shape[0]
    k = _kernel_from_dists(spec, r)
    a = k + noise_variance * np.eye(n)
    try:
        chol, _ = _chol_with_jitter(a, spec.signal_variance)
    except NumericalError:
        return None
    white = solve_triangular(chol, y_c, lower=True)
    alpha = solve_triangular(chol.T, white, lower=False)
    lml = -0.5 * float(y_c @ alpha) - float(np.sum(np.log(np.diag(chol)))) - 0.5 * n * _LOG_2PI

    a_inv = cho_solve((chol, True), np.eye(n))
    inner = np.outer(alpha, alpha) - a_inv  # d lml/d theta = 0.5 tr(inner @ dA/dtheta)
    dk_dlog_sig = k
    dk_dlog_ell = _kernel_grad_log_lengthscale(spec, r)
    grad = np.array([
        0.5 * float(np.sum(inner * dk_dlog_sig)),
        0.5 * float(np.sum(inner * dk_dlog_ell)),
        0.5 * noise_variance * float(np.trace(inner)),
    ])
    return lml, grad


def lml_gradient(model: GpModel) -> np.ndarray:
    """Gradient of the LML w.r.t. (log sigma^2, log lengthscale, log noise_variance)."""
    r = cdist(model.data.inputs, model.data.inputs)
    out = _lml_value_and_grad(r, model.centered_outputs, model.kernel, model.noise_variance)
    if out is None:
        raise NumericalError("gradient evaluation failed", _JITTER_MAX)
    return out[1]


def default_fit_bounds(data: Dataset, y_c: np.ndarray) -> dict:
    """Box bounds for hyperparameter search, scaled to the data."""
    spread = data.inputs.max(axis=0) - data.inputs.min(axis=0)
    diameter = float(np.linalg.norm(spread))
    if diameter <= 0.0:
        diameter = 1.0
    var_y = float(np.var(y_c))
    if var_y <= 1e-12:
        var_y = 1.0
    return {
        "lengthscale": (1e-2 * diameter, 2.0 * diameter),
        "signal_variance": (1e-4 * var_y, 1e4 * var_y),
        "noise_variance": (1e-8, var_y),
    }


# Deterministic interior starting fractions for the multi-start search
# (log-space interpolation between the bounds); the first start is the
# caller-provided initial spec.
_START_FRACTIONS = (
    (0.5, 0.5, 0.5),
    (0.25, 0.75, 0.25),
    (0.75, 0.25, 0.75),
    (0.9, 0.4, 0.1),
)


def fit_gp(
    data: Dataset,
    init: KernelSpec,
    noise_init: float,
    bounds: dict | None = None,
    center: bool = True,
) -> GpModel:
    """Maximize the log marginal likelihood over (sigma^2, lengthscale, noise).

    Multi-start L-BFGS-B in log-parameter space within box bounds; the
    returned model never has a lower LML than the initial hyperparameters.
    With ``center=True`` the outputs are de-meaned before fitting and the
    offset is added back at prediction time.
    """
    mean_offset = float(np.mean(data.outputs)) if center else 0.0
    y_c = data.outputs - mean_offset

    if data.n == 1:
        return build_gp(data, init, noise_init, mean_offset)
    if float(np.ptp(data.outputs)) == 0.0:
        # Degenerate data: nothing to fit, keep the initial hyperparameters.
        return build_gp(data, init, noise_init, mean_offset, fit_warning=True)

    box = default_fit_bounds(data, y_c)
    if bounds:
        box.update(bounds)
    log_bounds = np.log([
        box["signal_variance"],
        box["lengthscale"],
        box["noise_variance"],
    ])
    r = cdist(data.inputs, data.inputs)

    def objective(x):
        spec = replace(init, signal_variance=math.exp(x[0]), lengthscale=math.exp(x[1]))
        out = _lml_value_and_grad(r, y_c, spec, math.exp(x[2]))
        if out is None:
            return 1e25, np.zeros(3)
        lml, grad = out
        return -lml, -grad

    x_init = np.clip(
        np.log([init.signal_variance, init.lengthscale, max(noise_init, 1e-300)]),
        log_bounds[:, 0],
        log_bounds[:, 1],
    )
    starts = [x_init] + [
        log_bounds[:, 0] + np.asarray(f) * (log_bounds[:, 1] - log_bounds[:, 0])
        for f in _START_FRACTIONS
    ]

    best_x, best_neg = None, np.inf
    for x0 in starts:
        result = minimize(
            objective,
            x0,
            jac=True,
            method="L-BFGS-B",
            bounds=list(zip(log_bounds[:, 0], log_bounds[:, 1])),
        )
        if result.fun < best_neg:
            best_neg, best_x = result.fun, result.x

    init_model = build_gp(data, init, noise_init, mean_offset)
    if best_x is None:
        return replace(init_model, fit_warning=True)
    fitted_spec = replace(
        init, signal_variance=math.exp(best_x[0]), lengthscale=math.exp(best_x[1])
    )
    fitted = build_gp(data, fitted_spec, math.exp(best_x[2]), mean_offset)
    if log_marginal_likelihood(fitted) < log_marginal_likelihood(init_model):
        return init_model
    return fitted


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------

def _clamp_covariance(cov: np.ndarray) -> np.ndarray:
    cov = 0.5 * (cov + cov.T)
    d = np.diag(cov).copy()
    d[d < 0.0] = 0.0
    np.fill_diagonal(cov, d)
    return cov


def predict(model: GpModel, queries: np.ndarray) -> GaussianPrediction:
    """Joint predictive Gaussian of the latent function at the query rows."""
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    if queries.shape[1] != model.data.dim:
        raise ValueError(
            f"query dimension {queries.shape[1]} != training dimension {model.data.dim}"
        )
    k_s = kernel_matrix(model.kernel, model.data.inputs, queries)
    mean = k_s.T @ model.alpha + model.mean_offset
    v = solve_triangular(model.chol_factor, k_s, lower=True)
    cov = kernel_matrix(model.kernel, queries) - v.T @ v
    return GaussianPrediction(mean=mean, covariance=_clamp_covariance(cov))


def predict_mean_var(model: GpModel, queries: np.ndarray, chunk_size: int = 20000):
    """Predictive means and marginal variances only, computed in chunks.

    Avoids the m x m covariance allocation of :func:`predict`, so it scales
    to the million-point query banks used by the failure-probability metric.
    """
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    m = queries.shape[0]
    means = np.empty(m)
    variances = np.empty(m)
    prior_var = model.kernel.signal_variance
    for lo in range(0, m, chunk_size):
        hi = min(lo + chunk_size, m)
        k_s = kernel_matrix(model.kernel, model.data.inputs, queries[lo:hi])
        means[lo:hi] = k_s.T @ model.alpha + model.mean_offset
        v = solve_triangular(model.chol_factor, k_s, lower=True)
        variances[lo:hi] = prior_var - np.einsum("ij,ij->j", v, v)
    np.clip(variances, 0.0, None, out=variances)
    return means, variances


def _constraint_column(model: GpModel, constraint_point: np.ndarray):
    """Whitened constraint column (l21) and its Cholesky pivot (l22)."""
    c = np.asarray(constraint_point, dtype=float).reshape(1, -1)
    k_c = kernel_matrix(model.kernel, model.data.inputs, c)[:, 0]
    k_cc = model.kernel.signal_variance + model.noise_variance + model.jitter
    l21 = solve_triangular(model.chol_factor, k_c, lower=True)
    pivot = k_cc - float(l21 @ l21)
    if pivot <= 0.0:
        # Constraint coincides numerically with an existing training input
        # and there is no noise to separate them: jitter the virtual point.
        jitter = _JITTER_START * model.kernel.signal_variance
        while pivot <= 0.0 and jitter <= _JITTER_MAX * model.kernel.signal_variance:
            pivot = k_cc + jitter - float(l21 @ l21)
            jitter *= 10.0
        if pivot <= 0.0:
            raise NumericalError("constraint point degenerate with training data", jitter / 10.0)
        warnings.warn(
            "constraint point coincides with a training input at zero noise; "
            "jitter applied to the virtual observation",
            RuntimeWarning,
            stacklevel=3,
        )
    return c, k_c, l21, math.sqrt(pivot)


def predict_constrained(
    model: GpModel,
    queries: np.ndarray,
    constraint_point,
    constraint_value: float,
) -> GaussianPrediction:
    """Predict as if (constraint_point, constraint_value) were appended to the data.

    Hyperparameters are untouched; the augmented factorization is obtained
    from the cached one by a rank-one (bordering) update, so the result
    matches a full refit with the extra row to numerical precision at a
    fraction of the cost.
    """
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    c, k_c, l21, l22 = _constraint_column(model, constraint_point)

    # Whitened targets of the augmented system.
    z1 = model.white_targets
    z2 = (float(constraint_value) - model.mean_offset - float(l21 @ z1)) / l22
    alpha2 = z2 / l22
    alpha1 = solve_triangular(model.chol_factor.T, z1 - l21 * alpha2, lower=False)

    k_s = kernel_matrix(model.kernel, model.data.inputs, queries)
    k_cq = kernel_matrix(model.kernel, c, queries)[0]
    mean = k_s.T @ alpha1 + k_cq * alpha2 + model.mean_offset

    w1 = solve_triangular(model.chol_factor, k_s, lower=True)
    w2 = (k_cq - l21 @ w1) / l22
    cov = kernel_matrix(model.kernel, queries) - w1.T @ w1 - np.outer(w2, w2)
    return GaussianPrediction(mean=mean, covariance=_clamp_covariance(cov))


def posterior_cov(model: GpModel, a, b) -> float:
    """Predictive covariance between the outputs at two points."""
    pred = predict(model, np.vstack([np.ravel(a), np.ravel(b)]))
    return float(pred.covariance[0, 1])


def posterior_cov_many(model: GpModel, a, points: np.ndarray) -> np.ndarray:
    """Predictive covariance between one point ``a`` and many ``points`` at once."""
    a = np.asarray(a, dtype=float).reshape(1, -1)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    k_ab = kernel_matrix(model.kernel, a, points)[0]
    v_a = solve_triangular(model.chol_factor, kernel_matrix(model.kernel, model.data.inputs, a)[:, 0], lower=True)
    v_b = solve_triangular(model.chol_factor, kernel_matrix(model.kernel, model.data.inputs, points), lower=True)
    return k_ab - v_a @ v_b
