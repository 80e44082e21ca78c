"""Training-loss mathematics over diagonal-Gaussian latents and packed
motion features: KL terms, smooth-L1 reconstruction/latent terms, their
unweighted total, and analytic gradients for every term (this module is the
numeric reference for any trainer, so gradients are part of the contract)."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimMismatch

LATENT_DIM_DEFAULT = 256
SMOOTH_L1_BETA = 1.0
SIGMA_FLOOR = 1e-8


@dataclass(frozen=True)
class GaussianParams:
    """Diagonal Gaussian: mean and standard deviations (not variances)."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64)
        sigma = np.asarray(self.sigma, dtype=np.float64)
        if mu.ndim != 1 or sigma.shape != mu.shape:
            raise DimMismatch(f"mu/sigma must be equal-length vectors, got {mu.shape} / {sigma.shape}")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma))):
            raise DimMismatch("distribution parameters must be finite")
        if np.any(sigma <= 0):
            raise DimMismatch("sigma must be strictly positive")
        mu.setflags(write=False)
        sigma.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def dim(self) -> int:
        return self.mu.shape[0]

    @classmethod
    def standard(cls, dim: int = LATENT_DIM_DEFAULT) -> "GaussianParams":
        return cls(mu=np.zeros(dim), sigma=np.ones(dim))


def _check_same_dim(p: GaussianParams, q: GaussianParams) -> None:
    if p.dim != q.dim:
        raise DimMismatch(f"dimension mismatch: {p.dim} vs {q.dim}")


def kl_diag(p: GaussianParams, q: GaussianParams) -> float:
    """KL(p || q) for diagonal Gaussians:
    sum_i [ log(sq/sp) + (sp^2 + (mp - mq)^2) / (2 sq^2) - 1/2 ].
    Non-negative, zero iff p == q."""
    _check_same_dim(p, q)
    ratio = q.sigma / p.sigma
    return float(
        np.sum(np.log(ratio) + (p.sigma**2 + (p.mu - q.mu) ** 2) / (2.0 * q.sigma**2) - 0.5)
    )


def kl_diag_grad(p: GaussianParams, q: GaussianParams):
    """Gradients of kl_diag w.r.t. (mu_p, sigma_p, mu_q, sigma_q)."""
    _check_same_dim(p, q)
    diff = p.mu - q.mu
    inv_q2 = 1.0 / q.sigma**2
    d_mu_p = diff * inv_q2
    d_mu_q = -d_mu_p
    d_sigma_p = -1.0 / p.sigma + p.sigma * inv_q2
    d_sigma_q = 1.0 / q.sigma - (p.sigma**2 + diff**2) / q.sigma**3
    return d_mu_p, d_sigma_p, d_mu_q, d_sigma_q


def kl_to_standard(p: GaussianParams) -> float:
    """KL(p || N(0, I))."""
    return kl_diag(p, GaussianParams.standard(p.dim))


def kl_to_standard_grad(p: GaussianParams):
    d_mu_p, d_sigma_p, _, _ = kl_diag_grad(p, GaussianParams.standard(p.dim))
    return d_mu_p, d_sigma_p


def _as_pair(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DimMismatch(f"shape mismatch: {x.shape} vs {y.shape}")
    return x, y


def smooth_l1(x, y, beta: float = SMOOTH_L1_BETA) -> float:
    """Mean smooth-L1: 0.5 d^2 / beta inside |d| < beta, |d| - 0.5 beta outside."""
    x, y = _as_pair(x, y)
    d = x - y
    a = np.abs(d)
    per = np.where(a < beta, 0.5 * d**2 / beta, a - 0.5 * beta)
    return float(per.mean())


def smooth_l1_grad(x, y, beta: float = SMOOTH_L1_BETA):
    """Gradients of smooth_l1 w.r.t. (x, y)."""
    x, y = _as_pair(x, y)
    d = x - y
    per = np.where(np.abs(d) < beta, d / beta, np.sign(d))
    d_x = per / d.size
    return d_x, -d_x


def reparameterize(p: GaussianParams, noise: np.ndarray) -> np.ndarray:
    """Draw a latent from p given standard-normal noise: mu + sigma * noise."""
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != p.mu.shape:
        raise DimMismatch(f"noise shape {noise.shape} does not match dim {p.dim}")
    return p.mu + p.sigma * noise


@dataclass(frozen=True)
class LossBreakdown:
    """The six unweighted terms and their sum.

    kl_t / kl_m pull the text and motion distributions to the standard
    normal; kl_mt is KL(text dist || motion dist) and kl_tm the reverse;
    recon sums the smooth-L1 of both decoded branches against the ground
    truth; latent is the smooth-L1 between the two latent vectors.
    """

    kl_t: float
    kl_m: float
    kl_mt: float
    kl_tm: float
    recon: float
    latent: float
    total: float

    def to_dict(self) -> dict:
        return {
            "kl_t": self.kl_t,
            "kl_m": self.kl_m,
            "kl_mt": self.kl_mt,
            "kl_tm": self.kl_tm,
            "recon": self.recon,
            "latent": self.latent,
            "total": self.total,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def total_loss(
    text: GaussianParams,
    motion: GaussianParams,
    z_t: np.ndarray,
    z_m: np.ndarray,
    gt: np.ndarray,
    rec_t: np.ndarray,
    rec_m: np.ndarray,
) -> LossBreakdown:
    """Unweighted sum of the six supervision terms."""
    _check_same_dim(text, motion)
    z_t, z_m = _as_pair(z_t, z_m)
    kl_t = kl_to_standard(text)
    kl_m = kl_to_standard(motion)
    kl_mt = kl_diag(text, motion)
    kl_tm = kl_diag(motion, text)
    recon = smooth_l1(gt, rec_t) + smooth_l1(gt, rec_m)
    latent = smooth_l1(z_t, z_m)
    total = kl_t + kl_m + kl_mt + kl_tm + recon + latent
    return LossBreakdown(
        kl_t=kl_t, kl_m=kl_m, kl_mt=kl_mt, kl_tm=kl_tm,
        recon=recon, latent=latent, total=total,
    )


def total_loss_grad(
    text: GaussianParams,
    motion: GaussianParams,
    z_t: np.ndarray,
    z_m: np.ndarray,
    gt: np.ndarray,
    rec_t: np.ndarray,
    rec_m: np.ndarray,
) -> dict[str, np.ndarray]:
    """Analytic gradient of total_loss w.r.t. every input array.

    Keys: text_mu, text_sigma, motion_mu, motion_sigma, z_t, z_m, gt,
    rec_t, rec_m.
    """
    _check_same_dim(text, motion)
    g_t_mu, g_t_sigma = kl_to_standard_grad(text)
    g_m_mu, g_m_sigma = kl_to_standard_grad(motion)

    mt_mu_p, mt_sigma_p, mt_mu_q, mt_sigma_q = kl_diag_grad(text, motion)
    tm_mu_p, tm_sigma_p, tm_mu_q, tm_sigma_q = kl_diag_grad(motion, text)

    d_zt, d_zm = smooth_l1_grad(z_t, z_m)
    d_gt_t, d_rec_t = smooth_l1_grad(gt, rec_t)
    d_gt_m, d_rec_m = smooth_l1_grad(gt, rec_m)

    return {
        "text_mu": g_t_mu + mt_mu_p + tm_mu_q,
        "text_sigma": g_t_sigma + mt_sigma_p + tm_sigma_q,
        "motion_mu": g_m_mu + mt_mu_q + tm_mu_p,
        "motion_sigma": g_m_sigma + mt_sigma_q + tm_sigma_p,
        "z_t": d_zt,
        "z_m": d_zm,
        "gt": d_gt_t + d_gt_m,
        "rec_t": d_rec_t,
        "rec_m": d_rec_m,
    }
