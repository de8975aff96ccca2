"""Langevin walk, denoiser jump, and the deterministic gradient-flow map.

The walk runs unadjusted Langevin dynamics on an energy at a fine noise scale,
using the drift/diffusion pairing delta^2 and sqrt(2)*delta (note: this is a
reparameterization of the textbook pairing delta and sqrt(2*delta) with
delta_textbook = delta^2).  No Metropolis correction is applied, so the chain
carries an O(delta^2) discretization bias that tests measure rather than
remove.  The jump is one application of the denoiser at the fine scale.  The
composed pipeline denoises a coarse-noise observation, walks at the fine
scale, and jumps.

Energy sources are either an EnergyNet (its trained scale must match the
requested one) or an exact data model, whose energy is the negative log
density of its noisy version at the given scale.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .energy import EnergyNet


@dataclasses.dataclass(frozen=True)
class WalkJumpConfig:
    """Fine scale, step size, and step count for the Langevin walk."""

    sigma_prime: float = 0.05
    delta: float = 0.001
    tau: int = 100

    def __post_init__(self):
        if self.sigma_prime <= 0.0:
            raise ValueError(f"sigma_prime must be positive, got {self.sigma_prime}")
        if self.delta <= 0.0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.tau < 1:
            raise ValueError(f"tau must be >= 1, got {self.tau}")


def energy_value(source, y, sigma):
    """Scalar energy of the source at scale sigma (negative log density for
    exact models, up to their normalizer)."""
    if isinstance(source, EnergyNet):
        _check_scale(source, sigma)
        return source.energy(y)
    return -source.log_density_y(y, sigma)


def energy_grad(source, y, sigma):
    """Gradient of the energy at scale sigma."""
    if isinstance(source, EnergyNet):
        _check_scale(source, sigma)
        return source.input_grad(y)
    return -source.smoothed_score(y, sigma)


def _check_scale(net, sigma):
    if not np.isclose(net.sigma, sigma, rtol=0.0, atol=1e-12):
        raise ValueError(
            f"energy was trained for sigma={net.sigma}, requested sigma={sigma}"
        )


def langevin_walk(source, y0, cfg, gen, return_trajectory=False):
    """Unadjusted Langevin chain at the fine scale.

    Iterates y <- y - delta^2 * grad_energy(y) + sqrt(2) * delta * eps' for
    cfg.tau steps with standard normal eps'.  Returns the final iterate, or
    the whole (tau + 1, ...) trajectory when asked.  y0 may be one point
    (d,) or a batch of independent chains (n, d); chains never interact, so
    batching is exact.
    """
    y = np.asarray(y0, dtype=float).copy()
    drift = cfg.delta**2
    diffusion = np.sqrt(2.0) * cfg.delta
    traj = [y.copy()] if return_trajectory else None
    for step in range(cfg.tau):
        y = y - drift * energy_grad(source, y, cfg.sigma_prime) \
            + diffusion * gen.standard_normal(y.shape)
        if not np.all(np.isfinite(y)):
            raise FloatingPointError(f"non-finite iterate at walk step {step}")
        if return_trajectory:
            traj.append(y.copy())
    return np.asarray(traj) if return_trajectory else y


def jump(source, y, sigma_prime):
    """One denoiser application at the fine scale:
    y - sigma'^2 * grad_energy(y)."""
    y = np.asarray(y, dtype=float)
    return y - sigma_prime**2 * energy_grad(source, y, sigma_prime)


def walk_jump(coarse_source, fine_source, y, sigma, cfg, gen, return_trajectory=False):
    """Denoise a coarse-noise observation, walk at the fine scale, jump.

    y is a point corrupted at scale sigma.  The coarse denoiser output seeds
    the Langevin walk on the fine-scale energy; one final jump removes the
    fine noise.  The run-to-run spread of the output is therefore set by the
    fine scale and the walk diffusion, not by sigma.
    """
    y = np.asarray(y, dtype=float)
    y0 = y - sigma**2 * energy_grad(coarse_source, y, sigma)
    walked = langevin_walk(fine_source, y0, cfg, gen, return_trajectory)
    final = walked[-1] if return_trajectory else walked
    out = jump(fine_source, final, cfg.sigma_prime)
    return (out, walked) if return_trajectory else out


@dataclasses.dataclass(frozen=True)
class GradientFlowResult:
    point: np.ndarray
    converged: bool
    steps: int
    trajectory: np.ndarray | None = None


def gradient_flow(source, y, sigma, step, max_steps, tol, return_trajectory=False):
    """Explicit-Euler descent of the energy to an attractor.

    Iterates y <- y - step * grad_energy(y) until the gradient norm drops to
    tol or the step budget runs out.  Starting at a critical point returns
    immediately with converged=True.
    """
    if step <= 0.0 or tol <= 0.0:
        raise ValueError("step and tol must be positive")
    y = np.asarray(y, dtype=float).copy()
    traj = [y.copy()] if return_trajectory else None
    for t in range(int(max_steps) + 1):
        g = energy_grad(source, y, sigma)
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient at flow step {t}")
        if np.linalg.norm(g) <= tol:
            return GradientFlowResult(
                y, True, t, np.asarray(traj) if return_trajectory else None
            )
        if t == max_steps:
            break
        y = y - step * g
        if not np.all(np.isfinite(y)):
            raise FloatingPointError(f"non-finite iterate at flow step {t}")
        if return_trajectory:
            traj.append(y.copy())
    return GradientFlowResult(
        y, False, int(max_steps), np.asarray(traj) if return_trajectory else None
    )
