"""Adversarial training of the smoothed soft classifier.

The trainer minimizes the worst-case cross-entropy of the noise-averaged,
denoiser-composed soft classifier over an L2 ball around each example.  The
inner maximization is projected gradient ascent on the negative
log-probability of the true class.  Noise is drawn once per example per step
and reused across all attack iterations and the final parameter-gradient
evaluation (common random numbers), which makes the inner problem a
deterministic optimization and the whole step reproducible.

Modes: "adversarial" runs the full loop; "no_attack" trains on clean points
(attack budget treated as zero); "no_estimator" keeps the attack but replaces
the denoiser with the identity, giving the plain smoothed-adversarial
baseline.  The energy parameters never receive gradients: the backward pass
only ever produces classifier parameter gradients, and the denoiser enters
parameter gradients as a fixed input transform.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .classifiers import (
    PROB_FLOOR,
    EbClassifier,
    SoftClassifier,
    _grad_log_pi_batch,
    _pi_batch,
)
from .energy import TrainingDivergedError
from .mlp import Adam, schedule_lr
from .stats import rng_stream

MODE_ADVERSARIAL = "adversarial"
MODE_NO_ATTACK = "no_attack"
MODE_NO_ESTIMATOR = "no_estimator"
TRAIN_MODES = (MODE_ADVERSARIAL, MODE_NO_ATTACK, MODE_NO_ESTIMATOR)


@dataclasses.dataclass(frozen=True)
class AttackSpec:
    """L2 projected-gradient attack budget.

    step_size of None resolves to 2 * epsilon / steps: the first steps can
    reach the sphere, the rest refine along it.
    """

    epsilon: float
    steps: int = 16
    step_size: float | None = None
    m: int = 1

    def __post_init__(self):
        if self.epsilon < 0.0:
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")
        if self.epsilon > 0.0 and self.steps < 1:
            raise ValueError("steps must be >= 1 for a positive attack budget")
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if self.step_size is not None and self.step_size <= 0.0:
            raise ValueError("step_size must be positive when given")

    def resolved_step_size(self):
        if self.step_size is not None:
            return self.step_size
        return 2.0 * self.epsilon / max(self.steps, 1)


@dataclasses.dataclass(frozen=True)
class PgdResult:
    """Attack outcome: the best iterate found, its objective value, the clean
    objective value, and whether the search hit a non-finite gradient."""

    x_adv: np.ndarray
    adv_neg_log: float
    clean_neg_log: float
    aborted: bool


def _neg_log_pi_values(c, xs, ks, noise):
    """-log Pi_k per example with fixed noise, probabilities floored."""
    bsz = xs.shape[0]
    pis, _, _, _ = _pi_batch(c, xs, noise)
    pik = np.maximum(pis[np.arange(bsz), ks], PROB_FLOOR)
    return -np.log(pik), pis


def _pgd_batch(c, xs, ks, spec, noise):
    """Projected gradient ascent on -log Pi_k for a whole batch at once.

    Each step moves along the normalized gradient by the step size and
    projects back onto the epsilon ball; the reported point is the best
    iterate including the start, so the adversarial objective never falls
    below the clean one.  Examples whose gradient goes non-finite are frozen
    at their best iterate and flagged.
    """
    xs = np.asarray(xs, dtype=float)
    f0, _ = _neg_log_pi_values(c, xs, ks, noise)
    if spec.epsilon == 0.0:
        return xs.copy(), f0.copy(), f0, np.zeros(len(xs), dtype=bool)

    eta = spec.resolved_step_size()
    best_f = f0.copy()
    best_z = xs.copy()
    aborted = np.zeros(len(xs), dtype=bool)
    z = xs.copy()
    for _ in range(spec.steps):
        glp, _, _ = _grad_log_pi_batch(c, z, ks, noise)
        ascent = -glp  # gradient of -log Pi
        norms = np.linalg.norm(ascent, axis=1)
        bad = ~np.isfinite(norms)
        aborted |= bad
        movable = ~aborted & (norms > 0.0)
        move = np.zeros_like(ascent)
        move[movable] = eta * ascent[movable] / norms[movable, None]
        z = z + move
        delta = z - xs
        dnorm = np.linalg.norm(delta, axis=1)
        over = dnorm > spec.epsilon
        if np.any(over):
            delta[over] *= (spec.epsilon / dnorm[over])[:, None]
            z = xs + delta
        f, _ = _neg_log_pi_values(c, z, ks, noise)
        improved = ~aborted & np.isfinite(f) & (f > best_f)
        best_f = np.where(improved, f, best_f)
        best_z[improved] = z[improved]
    return best_z, best_f, f0, aborted


def pgd_attack(c, x, k, spec, noise):
    """Attack a single point; noise is the fixed (m, d) list reused across
    every step.  A zero budget returns the point unchanged."""
    x = np.asarray(x, dtype=float)
    noise = np.asarray(noise, dtype=float)
    best_z, best_f, f0, aborted = _pgd_batch(
        c, x[None, :], np.array([int(k)]), spec, noise[None, :, :]
    )
    return PgdResult(best_z[0], float(best_f[0]), float(f0[0]), bool(aborted[0]))


def xhat_objective_theta_grads(c, xs, ks, noise):
    """Mean -log Pi_k over the batch and its classifier parameter gradients.

    The attack points and the noise are held fixed; only the soft
    classifier's parameters receive gradients.  Returns (loss, grads, pis).
    """
    xs = np.asarray(xs, dtype=float)
    bsz, m, _ = noise.shape
    pis, probs, cache, _ = _pi_batch(c, xs, noise)
    pik = np.maximum(pis[np.arange(bsz), ks], PROB_FLOOR)
    loss = float(np.mean(-np.log(pik)))
    rep_k = np.repeat(np.asarray(ks), m)
    coef = np.repeat(-1.0 / (bsz * m * pik), m)
    pk = probs[np.arange(bsz * m), rep_k]
    onehot = np.eye(c.base.n_classes)[rep_k]
    dlogits = (coef * pk)[:, None] * (onehot - probs)
    _, grads = c.base._backward(cache, dlogits, want_params=True, want_input=False)
    return loss, grads, pis


@dataclasses.dataclass(frozen=True)
class ClassifierTrainConfig:
    """Hyperparameters for the smoothed-classifier training loop."""

    sigma: float
    mode: str = MODE_ADVERSARIAL
    steps: int = 1500
    batch_size: int = 64
    lr: float = 1e-3
    lr_final: float | None = None
    m: int = 1
    hidden: tuple = (64,)
    seed: int = 0

    def __post_init__(self):
        if self.mode not in TRAIN_MODES:
            raise ValueError(f"mode must be one of {TRAIN_MODES}, got {self.mode!r}")
        if self.steps < 1 or self.batch_size < 1 or self.m < 1:
            raise ValueError("steps, batch_size and m must be positive")
        if self.sigma < 0.0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")


def train_xhat(points, labels, estimator, cfg, attack, gen=None, callback=None):
    """Train the smoothed soft classifier by minibatch adversarial risk.

    points (n, d) and labels (n,) are the training set; `estimator` is the
    frozen denoiser (EnergyNet or exact model) the classifier is composed
    with, ignored in "no_estimator" mode.  Every mode draws the same batches
    and the same noise from `gen`, so runs differing only in mode consume
    identical randomness.

    Returns the trained SoftClassifier.  callback, when given, receives
    (step, record) with the clean loss, adversarial loss, attack success
    rate, and abort count for that step.
    """
    points = np.asarray(points, dtype=float)
    labels = np.asarray(labels)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError("points must be a nonempty (n, d) array")
    if labels.shape != (points.shape[0],):
        raise ValueError("labels must be one integer per point")
    if cfg.mode != MODE_NO_ATTACK and attack.epsilon > 0.0 and attack.m != cfg.m:
        raise ValueError(
            f"attack.m ({attack.m}) must equal the training m ({cfg.m}): "
            "the attack and the loss share one noise list per example"
        )
    n, dim = points.shape
    n_classes = int(labels.max()) + 1 if labels.size else 2
    n_classes = max(n_classes, 2)
    if gen is None:
        gen = rng_stream(cfg.seed, 1)

    clf = SoftClassifier.init(dim, tuple(cfg.hidden), n_classes, gen)
    params = clf.parameters()
    opt = Adam(params)
    est = None if cfg.mode == MODE_NO_ESTIMATOR else estimator
    run_attack = cfg.mode != MODE_NO_ATTACK and attack.epsilon > 0.0

    for step in range(cfg.steps):
        idx = gen.integers(0, n, size=cfg.batch_size)
        xb = points[idx]
        kb = labels[idx]
        noise = cfg.sigma * gen.standard_normal((cfg.batch_size, cfg.m, dim))
        c = EbClassifier(clf, est, cfg.sigma, cfg.m)
        clean_nll, _ = _neg_log_pi_values(c, xb, kb, noise)
        if run_attack:
            zb, adv_nll, _, aborted = _pgd_batch(c, xb, kb, attack, noise)
            n_aborted = int(aborted.sum())
        else:
            zb, adv_nll, n_aborted = xb, clean_nll, 0
        loss, grads, pis = xhat_objective_theta_grads(c, zb, kb, noise)
        if not np.isfinite(loss):
            raise TrainingDivergedError(step)
        opt.step(params, grads, schedule_lr(step, cfg.steps, cfg.lr, cfg.lr_final))
        if callback is not None:
            callback(step, {
                "clean_loss": float(np.mean(clean_nll)),
                "adv_loss": float(np.mean(adv_nll)),
                "attack_success": float(np.mean(np.argmax(pis, axis=1) != kb)),
                "aborted": n_aborted,
            })
    return clf
