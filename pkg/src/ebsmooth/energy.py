"""Learnable scalar energy field over noisy inputs.

A small softplus MLP phi(y) is trained so that y - sigma^2 * grad phi(y)
matches the posterior-mean denoiser of the data at noise scale sigma.  The
attack and training loops downstream need more than plain evaluation, so this
module carries, all in closed form:

  * energy(y)                the scalar field,
  * input_grad(y)            exact reverse-mode input gradient,
  * input_hvp(y, v)          exact Hessian-vector products
                             (forward-over-reverse, no finite differences),
  * parameter gradients of losses that contain input_grad inside them
                             (the denoising loss differentiates through the
                             gradient, i.e. double backpropagation).

Softplus is used throughout because the chain rule through the denoiser needs
a continuous second derivative; piecewise-linear activations would make the
Hessian-vector products above undefined.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .mlp import Adam, init_affine_stack, schedule_lr, sigmoid, softplus
from .stats import rng_stream


class TrainingDivergedError(RuntimeError):
    """Raised when a training loss stops being finite; carries the step index."""

    def __init__(self, step, what="loss"):
        super().__init__(f"non-finite {what} at training step {step}")
        self.step = step


def _as_batch(y, dim):
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        if y.shape[0] != dim:
            raise ValueError(f"point has dimension {y.shape[0]}, expected {dim}")
        return y[None, :], True
    if y.ndim == 2 and y.shape[1] == dim:
        return y, False
    raise ValueError(f"expected points of dimension {dim}, got shape {y.shape}")


class EnergyNet:
    """Fully-connected scalar field with softplus hidden layers.

    Parameters are the hidden affine stack plus a linear readout.  `sigma`
    records the noise scale this energy was fit for; consumers that compose
    it into a denoiser must use the same scale.
    """

    def __init__(self, weights, biases, out_w, out_b, sigma):
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        self.out_w = np.asarray(out_w, dtype=float)
        self.out_b = np.asarray(out_b, dtype=float).reshape(1)
        self.sigma = float(sigma)
        widths = [self.weights[0].shape[0]] if self.weights else [self.out_w.shape[0]]
        for w in self.weights:
            widths.append(w.shape[1])
        self.widths = tuple(widths)
        if self.out_w.shape != (self.widths[-1],):
            raise ValueError("readout width does not match last hidden width")

    @classmethod
    def init(cls, dim, hidden, sigma, gen):
        """Fresh network with Glorot-normal weights and zero biases."""
        widths = (dim, *hidden)
        ws, bs = init_affine_stack(widths, gen)
        scale = np.sqrt(1.0 / widths[-1])
        out_w = scale * gen.standard_normal(widths[-1])
        return cls(ws, bs, out_w, np.zeros(1), sigma)

    @property
    def dim(self):
        return self.widths[0]

    @property
    def n_hidden_layers(self):
        return len(self.weights)

    def parameters(self):
        params = []
        for w, b in zip(self.weights, self.biases):
            params.extend((w, b))
        params.extend((self.out_w, self.out_b))
        return params

    # -- evaluation ---------------------------------------------------------

    def _hidden_forward(self, yb):
        h = yb
        acts = []
        for w, b in zip(self.weights, self.biases):
            a = h @ w + b
            acts.append(a)
            h = softplus(a)
        return h, acts

    def energy(self, y):
        """Scalar energy, one value per input point."""
        yb, single = _as_batch(y, self.dim)
        h, _ = self._hidden_forward(yb)
        out = h @ self.out_w + self.out_b[0]
        return float(out[0]) if single else out

    def input_grad(self, y):
        """Exact gradient of the energy with respect to its input."""
        yb, single = _as_batch(y, self.dim)
        if not self.weights:
            g = np.broadcast_to(self.out_w, yb.shape).copy()
            return g[0] if single else g
        _, acts = self._hidden_forward(yb)
        d = self.out_w[None, :] * sigmoid(acts[-1])
        for i in range(len(self.weights) - 2, -1, -1):
            d = (d @ self.weights[i + 1].T) * sigmoid(acts[i])
        g = d @ self.weights[0].T
        return g[0] if single else g

    # -- gradient-dot machinery --------------------------------------------
    #
    # The scalar T(Y, U) = sum_i <u_i, grad phi(y_i)> is computed by pushing
    # the tangents U through a forward-mode pass alongside the primal one.
    # Reverse-differentiating T then yields, exactly:
    #   * dT/dY  = Hessian-vector products  (u_i held constant), and
    #   * dT/dtheta = parameter gradients of any loss whose upstream
    #     derivative with respect to grad phi is U.

    def _gdot_forward(self, yb, ub):
        h = [yb]
        hh = [ub]
        sig = []
        ah = []
        for w, b in zip(self.weights, self.biases):
            a = h[-1] @ w + b
            s = sigmoid(a)
            ahat = hh[-1] @ w
            h.append(softplus(a))
            hh.append(s * ahat)
            sig.append(s)
            ah.append(ahat)
        t = hh[-1] @ self.out_w
        return t, (h, hh, sig, ah)

    def _gdot_backward(self, cache, want_params, want_input):
        h, hh, sig, ah = cache
        n = h[0].shape[0]
        nlayers = len(self.weights)
        w_grads = [None] * nlayers
        b_grads = [None] * nlayers
        hb = np.zeros((n, self.widths[-1]))
        hhb = np.broadcast_to(self.out_w, (n, self.out_w.shape[0]))
        for i in range(nlayers - 1, -1, -1):
            s = sig[i]
            ahb = hhb * s
            ab = (hhb * ah[i]) * s * (1.0 - s) + hb * s
            if want_params:
                w_grads[i] = h[i].T @ ab + hh[i].T @ ahb
                b_grads[i] = ab.sum(axis=0)
            hb = ab @ self.weights[i].T
            hhb = ahb @ self.weights[i].T
        y_grad = hb if nlayers else np.zeros_like(h[0])
        out_w_grad = hh[-1].sum(axis=0) if want_params else None
        return w_grads, b_grads, out_w_grad, y_grad

    def input_hvp(self, y, v):
        """Hessian of the energy applied to v, exact to machine precision."""
        yb, single = _as_batch(y, self.dim)
        vb, _ = _as_batch(v, self.dim)
        if vb.shape != yb.shape:
            raise ValueError("y and v must have matching shapes")
        _, cache = self._gdot_forward(yb, vb)
        _, _, _, ygrad = self._gdot_backward(cache, want_params=False, want_input=True)
        return ygrad[0] if single else ygrad

    # -- denoiser view ------------------------------------------------------

    def estimate(self, y):
        """Denoised point y - sigma^2 * grad phi(y) at the trained scale."""
        yb, single = _as_batch(y, self.dim)
        out = yb - self.sigma**2 * self.input_grad(yb)
        return out[0] if single else out

    def estimate_vjp(self, y, u):
        """Transpose-Jacobian of the denoiser applied to u.

        The Jacobian is I - sigma^2 * hessian(phi), symmetric, so this also
        serves as the forward Jacobian action.
        """
        yb, single = _as_batch(y, self.dim)
        ub, _ = _as_batch(u, self.dim)
        out = ub - self.sigma**2 * self.input_hvp(yb, ub)
        return out[0] if single else out

    def copy(self):
        return EnergyNet(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.out_w.copy(),
            self.out_b.copy(),
            self.sigma,
        )


def denoise_loss_and_grads(net, x_clean, y_noisy):
    """Denoising least squares || x - (y - sigma^2 grad phi(y)) ||^2 and its
    parameter gradients.

    The loss contains the input gradient of the energy, so its parameter
    derivative needs second-order information; it is obtained by reverse
    differentiation of the gradient-dot pass with upstream vector
    (2/B)(xhat - x).  The readout bias never appears (only grad phi enters),
    so its gradient is identically zero.
    """
    sigma2 = net.sigma**2
    batch = x_clean.shape[0]
    g = net.input_grad(y_noisy)
    xhat = y_noisy - sigma2 * g
    err = xhat - x_clean
    loss = float(np.mean(np.sum(err * err, axis=1)))
    upstream = (2.0 / batch) * err
    _, cache = net._gdot_forward(y_noisy, upstream)
    w_grads, b_grads, out_w_grad, _ = net._gdot_backward(
        cache, want_params=True, want_input=False
    )
    grads = []
    for wg, bg in zip(w_grads, b_grads):
        grads.extend((-sigma2 * wg, -sigma2 * bg))
    grads.append(-sigma2 * out_w_grad)
    grads.append(np.zeros(1))
    return loss, grads


@dataclasses.dataclass(frozen=True)
class EnergyTrainConfig:
    """Hyperparameters for fitting the energy by denoising least squares."""

    sigma: float
    hidden: tuple = (128, 128)
    steps: int = 4000
    batch_size: int = 128
    lr: float = 1e-3
    lr_final: float | None = None
    beta1: float = 0.9
    beta2: float = 0.999
    seed: int = 0

    def __post_init__(self):
        if self.sigma <= 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.steps < 1 or self.batch_size < 1:
            raise ValueError("steps and batch_size must be positive")
        if not self.hidden:
            raise ValueError("at least one hidden layer is required for training")


def train_energy(data, cfg, gen=None, eval_data=None, eval_every=100, callback=None):
    """Fit an EnergyNet on clean samples by denoising least squares.

    One fresh noise draw per data point per step keeps the stochastic loss
    unbiased.  All randomness flows through `gen` (derived from cfg.seed when
    omitted), so a fixed seed reproduces the final parameters bit for bit in
    a single-worker run.

    callback, when given, is invoked as callback(step, record) with the
    training loss and, every `eval_every` steps, the held-out loss on
    eval_data.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[0] == 0:
        raise ValueError("data must be a nonempty (n, d) array")
    if gen is None:
        gen = rng_stream(cfg.seed, 0)
    n, dim = data.shape
    net = EnergyNet.init(dim, tuple(cfg.hidden), cfg.sigma, gen)
    params = net.parameters()
    opt = Adam(params, beta1=cfg.beta1, beta2=cfg.beta2)
    for step in range(cfg.steps):
        idx = gen.integers(0, n, size=cfg.batch_size)
        x = data[idx]
        y = x + cfg.sigma * gen.standard_normal(x.shape)
        loss, grads = denoise_loss_and_grads(net, x, y)
        if not np.isfinite(loss):
            raise TrainingDivergedError(step)
        opt.step(params, grads, schedule_lr(step, cfg.steps, cfg.lr, cfg.lr_final))
        if callback is not None:
            record = {"loss": loss}
            if eval_data is not None and step % eval_every == 0:
                record["eval_loss"] = denoise_eval_loss(net, eval_data, cfg.sigma, gen)
            callback(step, record)
    return net


def denoise_eval_loss(net, data, sigma, gen):
    """Denoising loss on held-out points with fresh noise."""
    data = np.asarray(data, dtype=float)
    y = data + sigma * gen.standard_normal(data.shape)
    xhat = net.estimate(y)
    return float(np.mean(np.sum((xhat - data) ** 2, axis=1)))
