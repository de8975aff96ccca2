"""Analytic data models with exact scores and Bayes estimators.

These are the ground truth the learned pieces are judged against.  Every model
knows the density of its Gaussian-corrupted version Y = X + N(0, sigma^2 I),
the score of that density, the score's Jacobian action, and therefore the
exact posterior-mean denoiser xhat(y) = y + sigma^2 * score(y).

All evaluation methods are vectorized: y may be a single point of shape (d,)
or a batch of shape (n, d), and the output matches.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from scipy.special import logsumexp


def beta_of(sigma, sigma0):
    """Shrinkage factor 1 / (1 + (sigma/sigma0)^2) of the Gaussian denoiser."""
    if sigma0 <= 0.0:
        raise ValueError(f"sigma0 must be positive, got {sigma0}")
    if sigma < 0.0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    return 1.0 / (1.0 + (sigma / sigma0) ** 2)


def _as_batch(y, dim):
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        if y.shape[0] != dim:
            raise ValueError(f"point has dimension {y.shape[0]}, expected {dim}")
        return y[None, :], True
    if y.ndim == 2:
        if y.shape[1] != dim:
            raise ValueError(f"points have dimension {y.shape[1]}, expected {dim}")
        return y, False
    raise ValueError(f"expected a point or a batch of points, got shape {y.shape}")


def _unbatch(out, single):
    return out[0] if single else out


@dataclasses.dataclass(frozen=True)
class IsoGaussian:
    """Isotropic Gaussian data model N(mean, sigma0^2 I)."""

    sigma0: float
    dim: int
    mean: np.ndarray | None = None

    def __post_init__(self):
        if self.sigma0 <= 0.0:
            raise ValueError(f"sigma0 must be positive, got {self.sigma0}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        mean = np.zeros(self.dim) if self.mean is None else np.asarray(self.mean, float)
        if mean.shape != (self.dim,):
            raise ValueError(f"mean has shape {mean.shape}, expected ({self.dim},)")
        object.__setattr__(self, "mean", mean)

    def sample(self, n, gen):
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        return self.mean[None, :] + self.sigma0 * gen.standard_normal((n, self.dim))

    def log_density_y(self, y, sigma):
        """Log density of Y = X + N(0, sigma^2 I) at y."""
        yb, single = _as_batch(y, self.dim)
        s2 = sigma * sigma + self.sigma0 * self.sigma0
        sq = np.sum((yb - self.mean) ** 2, axis=1)
        out = -0.5 * sq / s2 - 0.5 * self.dim * np.log(2.0 * np.pi * s2)
        return _unbatch(out, single)

    def smoothed_score(self, y, sigma):
        """Gradient of log f_Y at y: -(y - mean) / (sigma^2 + sigma0^2)."""
        yb, single = _as_batch(y, self.dim)
        s2 = sigma * sigma + self.sigma0 * self.sigma0
        return _unbatch((self.mean - yb) / s2, single)

    def score_hvp(self, y, v, sigma):
        """Hessian of log f_Y applied to v; constant -v / (sigma^2 + sigma0^2)."""
        vb, single = _as_batch(v, self.dim)
        s2 = sigma * sigma + self.sigma0 * self.sigma0
        return _unbatch(-vb / s2, single)

    def bayes_estimate(self, y, sigma):
        """Posterior mean of X given Y = y: y + sigma^2 * score(y)."""
        yb, single = _as_batch(y, self.dim)
        return _unbatch(yb + sigma * sigma * self.smoothed_score(yb, sigma), single)


@dataclasses.dataclass(frozen=True)
class IsoMixture:
    """Mixture of isotropic Gaussians sharing one scale sigma0.

    means has shape (K, d); weights are positive and sum to one (uniform when
    omitted).  The per-component log masses are combined with the
    max-subtracted log-sum-exp, so scores stay finite far from all components
    where the raw component masses underflow.
    """

    means: np.ndarray
    sigma0: float
    weights: np.ndarray | None = None

    def __post_init__(self):
        means = np.atleast_2d(np.asarray(self.means, dtype=float))
        object.__setattr__(self, "means", means)
        if self.sigma0 <= 0.0:
            raise ValueError(f"sigma0 must be positive, got {self.sigma0}")
        k = means.shape[0]
        w = np.full(k, 1.0 / k) if self.weights is None else np.asarray(self.weights, float)
        if w.shape != (k,):
            raise ValueError(f"weights have shape {w.shape}, expected ({k},)")
        if np.any(w <= 0.0):
            raise ValueError("weights must be positive")
        if abs(float(w.sum()) - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {w.sum()!r}")
        object.__setattr__(self, "weights", w)

    @classmethod
    def symmetric(cls, mu, sigma0):
        """Two equal-weight components at +mu and -mu."""
        mu = np.asarray(mu, dtype=float)
        return cls(means=np.stack([mu, -mu]), sigma0=sigma0)

    @property
    def dim(self):
        return self.means.shape[1]

    @property
    def n_components(self):
        return self.means.shape[0]

    def sample(self, n, gen):
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        comp = gen.choice(self.n_components, size=n, p=self.weights)
        return self.means[comp] + self.sigma0 * gen.standard_normal((n, self.dim))

    def _component_logmass(self, yb, sigma):
        s2 = sigma * sigma + self.sigma0 * self.sigma0
        diffs = self.means[None, :, :] - yb[:, None, :]          # (n, K, d)
        sq = np.sum(diffs * diffs, axis=2)                       # (n, K)
        return np.log(self.weights)[None, :] - 0.5 * sq / s2, diffs, s2

    def log_density_y(self, y, sigma):
        yb, single = _as_batch(y, self.dim)
        logmass, _, s2 = self._component_logmass(yb, sigma)
        out = logsumexp(logmass, axis=1) - 0.5 * self.dim * np.log(2.0 * np.pi * s2)
        return _unbatch(out, single)

    def _responsibilities(self, yb, sigma):
        logmass, diffs, s2 = self._component_logmass(yb, sigma)
        shifted = logmass - logmass.max(axis=1, keepdims=True)
        w = np.exp(shifted)
        return w / w.sum(axis=1, keepdims=True), diffs, s2

    def smoothed_score(self, y, sigma):
        """Gradient of log f_Y: responsibility-weighted pull toward the means."""
        yb, single = _as_batch(y, self.dim)
        resp, diffs, s2 = self._responsibilities(yb, sigma)
        return _unbatch(np.einsum("nk,nkd->nd", resp, diffs) / s2, single)

    def score_hvp(self, y, v, sigma):
        """Hessian of log f_Y applied to v.

        With r the responsibilities and g_k = (mu_k - y)/s2 the per-component
        pulls, the Hessian action is (sum_k r_k (c_k - cbar) (mu_k - y) - v)/s2
        where c_k = <g_k, v> and cbar is their responsibility average.
        """
        yb, ysingle = _as_batch(y, self.dim)
        vb, _ = _as_batch(v, self.dim)
        if vb.shape != yb.shape:
            raise ValueError("y and v must have matching shapes")
        resp, diffs, s2 = self._responsibilities(yb, sigma)
        c = np.einsum("nkd,nd->nk", diffs, vb) / s2
        cbar = np.sum(resp * c, axis=1, keepdims=True)
        pulled = np.einsum("nk,nkd->nd", resp * (c - cbar), diffs)
        return _unbatch((pulled - vb) / s2, ysingle)

    def bayes_estimate(self, y, sigma):
        """Posterior mean of X given Y = y: y + sigma^2 * score(y)."""
        yb, single = _as_batch(y, self.dim)
        return _unbatch(yb + sigma * sigma * self.smoothed_score(yb, sigma), single)


def symmetric_mixture_estimate(mu, sigma0, y, sigma):
    """Closed form of the symmetric two-component denoiser.

    beta*y + (1-beta) * tanh(<beta*y, mu>/sigma0^2) * mu.  Kept as a separate
    code path from IsoMixture.bayes_estimate so the two can cross-check each
    other in tests.
    """
    mu = np.asarray(mu, dtype=float)
    y = np.asarray(y, dtype=float)
    beta = beta_of(sigma, sigma0)
    inner = (beta / sigma0**2) * (y @ mu)
    return beta * y + (1.0 - beta) * np.multiply.outer(np.tanh(inner), mu)
