"""Design-gradient estimators for the expected information gain.

All three estimators average total design derivatives of log likelihoods
along reparameterized sampling paths y = g(theta, eps, lam):

* `ueeg_mcmc_gradient` - contrasts each sample's own log likelihood against
  posterior samples for its observation; unbiased when the posterior
  sampling is exact, and any MCMC chain here starts at the generating theta,
  which is already an exact posterior draw for its own observation.
* `beeg_ap_gradient`   - replaces the posterior by a softmax over one shared
  batch of prior atoms; algebraically the gradient of the sample-reuse EIG
  estimator, at cost M forward evaluations per call.
* `pce_gradient`       - the gradient of the contrastive lower bound.

Gradients are assembled from likelihood partials contracted against the
forward/observation tangents, which keeps the cost at O(pairs * obs) plus
O(samples * obs * d) instead of materializing per-pair tangents.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dual
from .errors import EstimatorError
from .models.base import Model, SimBudget, Theta, design_values
from .samplers import SamplerConfig, posterior_draws

__all__ = ["GradEstimate", "ueeg_mcmc_gradient", "beeg_ap_gradient", "pce_gradient"]


@dataclass(frozen=True)
class GradEstimate:
    gradient: np.ndarray
    outer_M: int
    inner_N: int
    forward_evals_used: int

    def __post_init__(self):
        if not np.all(np.isfinite(self.gradient)):
            raise EstimatorError("non-finite gradient estimate")


def _draw_batch(model: Model, rng: np.random.Generator, size: int):
    return model.sample_prior_values(rng, size), model.sample_noise_values(rng, size)


def softmax_rows(ll: np.ndarray) -> np.ndarray:
    """Row-wise softmax of log weights; invariant to per-row shifts."""
    m = np.max(ll, axis=-1, keepdims=True)
    w = np.exp(ll - m)
    return w / np.sum(w, axis=-1, keepdims=True)


def _contract(coeff, d_dy, d_df, y_tan, f_tan, f_per_row: bool) -> np.ndarray:
    """Design gradient of sum_ab coeff[a,b] * ll[a,b] given likelihood
    partials and the tangents of y (rows) and f (columns or per-row)."""
    ay = np.einsum("ab,abt->at", coeff, d_dy)
    grad = np.einsum("at,atk->k", ay, y_tan)
    if f_per_row:
        af = coeff[..., None] * d_df
        grad = grad + np.einsum("abt,abtk->k", af, f_tan)
    else:
        bf = np.einsum("ab,abt->bt", coeff, d_df)
        grad = grad + np.einsum("bt,btk->k", bf, f_tan)
    return grad


def beeg_ap_gradient(
    model: Model,
    lam,
    M: int,
    rng: np.random.Generator,
    budget: SimBudget | None = None,
    batch: tuple[np.ndarray, np.ndarray] | None = None,
) -> GradEstimate:
    """Atomic-prior EIG gradient from one batch of prior samples.

    Passing `batch` reuses a fixed atom set instead of drawing a fresh one.
    Consumes exactly M forward evaluations.
    """
    budget = budget if budget is not None else SimBudget()
    budget.new_design_version()
    start = budget.forward_evals
    if batch is None:
        thetas, eps = _draw_batch(model, rng, M)
    else:
        thetas = np.asarray(batch[0], dtype=float)
        eps = np.asarray(batch[1], dtype=float)
    M = thetas.shape[0]
    lam_dual = dual.lift_design(design_values(lam))
    f = model.forward(thetas, lam_dual)
    budget.charge(M)
    y = model.observe(f, eps)
    ll, d_dy, d_df = model.log_density_value_and_partials(
        y.value[:, None, :], f.value[None, :, :]
    )
    dead = np.isneginf(ll).all(axis=1)
    if np.any(dead):
        i = int(np.argmax(dead))
        raise EstimatorError(f"no atom explains observation {i}")
    coeff = np.eye(M) - softmax_rows(ll)
    grad = _contract(coeff, d_dy, d_df, y.tangent, f.tangent, f_per_row=False) / M
    return GradEstimate(grad, M, M, budget.forward_evals - start)


def pce_gradient(
    model: Model,
    lam,
    M: int,
    N: int,
    rng: np.random.Generator,
    budget: SimBudget | None = None,
) -> GradEstimate:
    """Gradient of the contrastive lower bound with reparameterized paths.

    Costs M*(N+1) forward evaluations: the own samples plus M*N fresh
    contrastive prior samples.
    """
    budget = budget if budget is not None else SimBudget()
    budget.new_design_version()
    start = budget.forward_evals
    lam_dual = dual.lift_design(design_values(lam))
    thetas, eps = _draw_batch(model, rng, M)
    f = model.forward(thetas, lam_dual)
    budget.charge(M)
    y = model.observe(f, eps)
    if N == 0:
        d = lam_dual.shape[0]
        return GradEstimate(np.zeros(d), M, N, budget.forward_evals - start)
    inner = model.sample_prior_values(rng, M * N).reshape(M, N, model.theta_dim)
    f_in = model.forward(inner, lam_dual)
    budget.charge(M * N)
    f_all = dual.concatenate([f[:, None, :], f_in], axis=1)
    ll, d_dy, d_df = model.log_density_value_and_partials(
        y.value[:, None, :], f_all.value
    )
    dead = np.isneginf(ll).all(axis=1)
    if np.any(dead):
        i = int(np.argmax(dead))
        raise EstimatorError(f"no contrastive sample explains observation {i}")
    coeff = -softmax_rows(ll)
    coeff[:, 0] += 1.0
    grad = _contract(coeff, d_dy, d_df, y.tangent, f_all.tangent, f_per_row=True) / M
    return GradEstimate(grad, M, N, budget.forward_evals - start)


def ueeg_mcmc_gradient(
    model: Model,
    lam,
    M: int,
    sampler_cfg: SamplerConfig,
    rng: np.random.Generator,
    budget: SimBudget | None = None,
) -> GradEstimate:
    """Posterior-contrast EIG gradient.

    For each of M prior draws, the observation's own log-likelihood design
    derivative is contrasted with the average over sampler_cfg.n_samples
    posterior draws.  With kind="exact" the posterior draws are exact and
    the estimator is unbiased; MCMC kinds contribute only sampling bias.
    Costs at most M * (chain evaluations + 1) forward passes.
    """
    budget = budget if budget is not None else SimBudget()
    budget.new_design_version()
    start = budget.forward_evals
    lam_v = design_values(lam)
    lam_dual = dual.lift_design(lam_v)
    N = sampler_cfg.n_samples

    if sampler_cfg.kind == "exact":
        batch_sampler = getattr(model, "conjugate_posterior_sample_batch", None)
        if batch_sampler is None:
            raise EstimatorError(f"model {model.name} has no exact posterior sampler")
        thetas, eps = _draw_batch(model, rng, M)
        f = model.forward(thetas, lam_dual)
        budget.charge(M)
        y = model.observe(f, eps)
        post = batch_sampler(y.value, lam_v, N, rng)
        f_post = model.forward(post, lam_dual)
        budget.charge(M * N)
        _, d_dy0, d_df0 = model.log_density_value_and_partials(y.value, f.value)
        _, d_dyp, d_dfp = model.log_density_value_and_partials(
            y.value[:, None, :], f_post.value
        )
        g_own = np.einsum("at,atk->k", d_dy0, y.tangent) + np.einsum(
            "at,atk->k", d_df0, f.tangent
        )
        coeff = np.full((M, N), 1.0 / N)
        g_post = _contract(coeff, d_dyp, d_dfp, y.tangent, f_post.tangent, f_per_row=True)
        grad = (g_own - g_post) / M
        return GradEstimate(grad, M, N, budget.forward_evals - start)

    terms = np.zeros((M, lam_v.size))
    child_rngs = rng.spawn(M)
    for i in range(M):
        theta = Theta(model.sample_prior_values(child_rngs[i], 1)[0])
        eps = model.sample_noise(child_rngs[i])
        y = model.simulate(theta, eps, lam_dual, budget)
        try:
            draws, _ = posterior_draws(
                model, y, lam_dual, sampler_cfg, budget, child_rngs[i], init_theta=theta
            )
        except Exception as exc:
            raise EstimatorError(
                f"posterior chain failed for outer sample {i}: {exc}"
            ) from exc
        t_own = model.log_likelihood(y, theta, lam_dual, budget).tangent
        t_post = np.zeros_like(t_own)
        for theta_p in draws:
            t_post += model.log_likelihood(y, theta_p, lam_dual, budget).tangent
        terms[i] = t_own - t_post / len(draws)
    grad = terms.mean(axis=0)
    return GradEstimate(grad, M, N, budget.forward_evals - start)
