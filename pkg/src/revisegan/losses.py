"""Loss terms for the three players and the weighted total.

Conventions
-----------
* Probabilities are clamped to ``[1e-7, 1 - 1e-7]`` before any log.
* Expectations are empirical means over the batch (and over score-map cells
  for the patch critic's terms).
* The generator's adversarial terms default to the non-saturating form
  ``-E[log p]``; ``mode="one_minus"`` switches to ``-E[log(1 - p)]`` for
  side-by-side comparison of the two sign conventions.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

__all__ = [
    "ObjectiveWeights",
    "LossReport",
    "real_nll",
    "fake_nll",
    "patch_d_loss",
    "gradient_penalty",
    "reviser_loss",
    "l1_terms",
    "generator_loss",
    "perturb_inputs",
    "input_gradient_norms",
]

PROB_EPS = 1e-7


@dataclass(frozen=True)
class ObjectiveWeights:
    """Scalar hyperparameters of the composite objective.

    alpha: gradient-penalty coefficient of the reviser loss.
    beta: full-image L1 weight.
    gamma: region L1 weight.
    lambda_balance: balance in [0, 1] between patch-critic (0) and reviser (1)
        adversarial pressure on the generator.
    delta_scale: magnitude of the random perturbation anchoring the penalty.
    """

    alpha: float = 10.0
    beta: float = 100.0
    gamma: float = 100.0
    lambda_balance: float = 0.5
    delta_scale: float = 0.5

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "delta_scale"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not 0.0 <= self.lambda_balance <= 1.0:
            raise ValueError(
                f"lambda_balance must lie in [0, 1], got {self.lambda_balance}"
            )


@dataclass(frozen=True)
class LossReport:
    """Per-step telemetry snapshot.

    ``g_adv_patch`` and ``g_adv_reviser`` are the raw (unweighted)
    non-saturating terms; ``total_g`` is the weighted generator loss that was
    actually optimized.  ``scoremap_mean`` is the mean patch-critic score on
    the generated samples.
    """

    d_loss: float
    r_loss: float
    g_adv_patch: float
    g_adv_reviser: float
    l1_full: float
    l1_region: float
    penalty: float
    total_g: float
    scoremap_mean: float

    FIELDS = (
        "d_loss",
        "r_loss",
        "g_adv_patch",
        "g_adv_reviser",
        "l1_full",
        "l1_region",
        "penalty",
        "total_g",
        "scoremap_mean",
    )

    def values(self) -> tuple[float, ...]:
        return tuple(getattr(self, f) for f in self.FIELDS)


def _as_tensor(p):
    return p if torch.is_tensor(p) else torch.as_tensor(p, dtype=torch.float64)


def _log_prob(p):
    return torch.log(torch.clamp(_as_tensor(p), PROB_EPS, 1.0 - PROB_EPS))


def real_nll(probs) -> torch.Tensor:
    """-E[log p]: pressure toward classifying (or being classified) real."""
    return -_log_prob(probs).mean()


def fake_nll(probs) -> torch.Tensor:
    """-E[log(1 - p)]: pressure toward classifying fake."""
    return -torch.log1p(-torch.clamp(_as_tensor(probs), PROB_EPS, 1.0 - PROB_EPS)).mean()


def patch_d_loss(scores_real, scores_fake) -> torch.Tensor:
    """Patch-critic loss: -E[log D(x, y)] - E[log(1 - D(x, G(x)))],
    averaged over batch and score-map cells."""
    return real_nll(scores_real) + fake_nll(scores_fake)


def gradient_penalty(grad_norms, alpha: float) -> torch.Tensor:
    """alpha * E[(||grad|| - 1)^2] over per-sample input-gradient norms."""
    g = _as_tensor(grad_norms)
    return alpha * ((g - 1.0) ** 2).mean()


def reviser_loss(p_real, p_masked_fake, grad_norms, alpha: float = 10.0) -> torch.Tensor:
    """Reviser loss: adversarial separation of real pairs from masked fakes,
    plus the gradient-norm penalty anchored at perturbed real points."""
    return real_nll(p_real) + fake_nll(p_masked_fake) + gradient_penalty(grad_norms, alpha)


def l1_terms(real, fake, real_crop, fake_crop, weights: ObjectiveWeights):
    """Weighted mean-absolute-error pair: (beta * full image, gamma * region)."""
    if real.shape != fake.shape:
        raise ValueError(f"full-image shapes differ: {tuple(real.shape)} vs {tuple(fake.shape)}")
    if real_crop.shape != fake_crop.shape:
        raise ValueError(
            f"crop shapes differ: {tuple(real_crop.shape)} vs {tuple(fake_crop.shape)}"
        )
    full = weights.beta * (_as_tensor(real) - _as_tensor(fake)).abs().mean()
    region = weights.gamma * (_as_tensor(real_crop) - _as_tensor(fake_crop)).abs().mean()
    return full, region


def generator_loss(scores_fake, p_masked_fake, l1_full, l1_region,
                   weights: ObjectiveWeights, mode: str = "nonsaturating") -> torch.Tensor:
    """Weighted generator loss.

    ``(1 - lambda)`` scales the patch-critic term and ``lambda`` the reviser
    term; a zero coefficient drops its term entirely, so at the endpoints one
    critic exerts no gradient on the generator.  L1 terms are added as given.
    """
    if mode == "nonsaturating":
        adv = real_nll
    elif mode == "one_minus":
        adv = fake_nll
    else:
        raise ValueError(f"unknown adversarial mode {mode!r}")
    lam = weights.lambda_balance
    total = _as_tensor(l1_full) + _as_tensor(l1_region)
    if lam < 1.0:
        total = total + (1.0 - lam) * adv(scores_fake)
    if lam > 0.0:
        total = total + lam * adv(p_masked_fake)
    return total


def perturb_inputs(x: torch.Tensor, delta_scale: float,
                   generator: torch.Generator | int | None = None) -> torch.Tensor:
    """Return ``x + delta``, ``delta = delta_scale * std(x) * U[0, 1]`` per element.

    ``std(x)`` is the (unbiased) standard deviation over the whole batch.
    ``delta_scale = 0`` returns ``x`` unchanged.  Deterministic given a seed
    or a generator.
    """
    if delta_scale == 0.0:
        return x
    if isinstance(generator, int):
        generator = torch.Generator(device=x.device).manual_seed(generator)
    u = torch.rand(x.shape, generator=generator, dtype=x.dtype, device=x.device)
    return x + delta_scale * x.std() * u


def input_gradient_norms(score_fn, inputs: torch.Tensor,
                         create_graph: bool = True) -> torch.Tensor:
    """Per-sample L2 norm of the gradient of ``score_fn(inputs).sum()``.

    ``score_fn`` maps an input batch to per-sample scalars.  The input is
    re-leafed so the caller's graph is untouched; with ``create_graph`` the
    norms stay differentiable for the penalty's own backward pass.
    """
    probe = inputs.detach().requires_grad_(True)
    out = score_fn(probe)
    grad, = torch.autograd.grad(out.sum(), probe, create_graph=create_graph)
    # epsilon under the root keeps the backward finite at exactly-zero gradients
    return torch.sqrt(grad.reshape(len(probe), -1).pow(2).sum(dim=1) + 1e-12)
