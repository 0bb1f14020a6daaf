"""Zero-forcing precoding, required transmit power, and Monte Carlo SINR.

With estimated channel Ghat (M x K), the normalized ZF precoder is

    A = Ghat* (Ghat^T Ghat*)^{-1} / sqrt(Tr((Ghat^T Ghat*)^{-1}))

so the precoded vector has unit expected power. Internally everything is
computed from the Hermitian positive definite Gram matrix H = Ghat^H Ghat,
using the identities Ghat^T Ghat* = conj(H), A_unnorm = conj(Ghat H^{-1}),
and Tr(conj(H)^{-1}) = Tr(H^{-1}); a Cholesky factorization provides both
the inverse and a cheap condition estimate.

SINR per user is estimated by plain Monte Carlo over pilot-noise draws: for
each draw build Ghat, form A, take the couplings v_ki = g_k^T a_i, and
average. The SINR then follows from

    SINR_k = rho_dl |E{v_kk}|^2
             / (sigma^2 + rho_dl sum_{i != k} E{|v_ki|^2} + rho_dl var{v_kk})

where all expectations are over the channel estimation errors only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky
from scipy.linalg.blas import zherk
from scipy.linalg.lapack import zpocon, ztrtri

from .channel import ChannelMatrix, PilotConfig
from .errors import ConfigError, SingularMatrixError, StatisticalValidityError

COND_LIMIT = 1e12


@dataclass(frozen=True)
class LinkBudget:
    """Total downlink power rho_dl (W), noise power sigma2 (W), and the
    spectral-efficiency target (bit/s/Hz) used for required-power sizing."""

    rho_dl: float
    sigma2: float
    target_se: float

    def __post_init__(self):
        if self.rho_dl < 0 or self.sigma2 <= 0 or self.target_se < 0:
            raise ConfigError(
                f"link budget must satisfy rho_dl >= 0, sigma2 > 0, target_se >= 0; "
                f"got ({self.rho_dl}, {self.sigma2}, {self.target_se})"
            )


@dataclass
class Precoder:
    """Normalized ZF precoding matrix (columns a_k) and the Gram-inverse trace."""

    matrix: np.ndarray
    trace: float

    def __post_init__(self):
        total = float(np.sum(np.abs(self.matrix) ** 2))
        if abs(total - 1.0) > 1e-10:
            raise SingularMatrixError(
                f"precoder normalization broken: sum ||a_k||^2 = {total!r}"
            )


def _entries(g) -> np.ndarray:
    return g.entries if isinstance(g, ChannelMatrix) else np.asarray(g, dtype=complex)


def _hermitian_one_norm_upper(u: np.ndarray) -> float:
    a = np.abs(np.triu(u))
    return float((a.sum(axis=0) + a.sum(axis=1) - np.diagonal(a)).max())


def _gram_cholesky_upper(g: np.ndarray, cond_limit: float):
    """Upper Cholesky factor of H = G^H G with a condition guard."""
    m, k = g.shape
    if m < k:
        raise SingularMatrixError(
            f"Gram matrix is rank deficient: M = {m} < K = {k}"
        )
    gram_u = zherk(1.0, g, trans=2)
    try:
        chol = cholesky(gram_u, lower=False, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"Gram matrix not positive definite: {exc}") from exc
    rcond, info = zpocon(chol, _hermitian_one_norm_upper(gram_u))
    if info != 0 or rcond <= 0 or 1.0 / rcond > cond_limit:
        cond = math.inf if rcond <= 0 else 1.0 / rcond
        raise SingularMatrixError(
            f"Gram matrix condition estimate {cond:.3e} exceeds limit {cond_limit:.0e}",
            cond_estimate=cond,
        )
    return chol


def inverse_trace(g, cond_limit: float = COND_LIMIT) -> float:
    """Tr((G^T G*)^{-1}), computed as the squared Frobenius norm of the
    inverse Cholesky factor of G^H G (the two traces are equal)."""
    chol = _gram_cholesky_upper(_entries(g), cond_limit)
    uinv, info = ztrtri(chol, lower=0)
    if info != 0:
        raise SingularMatrixError(f"triangular inversion failed (info = {info})")
    return float(np.sum(uinv.real**2 + uinv.imag**2))


def zf_precoder(g_hat, cond_limit: float = COND_LIMIT) -> Precoder:
    """Normalized zero-forcing precoder for an (estimated) channel matrix."""
    g = _entries(g_hat)
    chol = _gram_cholesky_upper(g, cond_limit)
    hinv = cho_solve((chol, False), np.eye(g.shape[1], dtype=complex),
                     check_finite=False)
    trace = float(np.trace(hinv).real)
    a = np.conj(g @ hinv) / math.sqrt(trace)
    return Precoder(matrix=a, trace=trace)


def zf_required_power(g, budget: LinkBudget, cond_limit: float = COND_LIMIT) -> float:
    """Downlink power (W) at which every user's perfect-CSI ZF SINR reaches
    2^target_se - 1, i.e. (2^se - 1) * sigma2 * Tr((G^T G*)^{-1})."""
    gamma = 2.0**budget.target_se - 1.0
    if gamma == 0.0:
        return 0.0
    return gamma * budget.sigma2 * inverse_trace(g, cond_limit)


def _batched_cholesky(gram: np.ndarray):
    """Lower Cholesky factors for a (B, K, K) stack; failures masked out."""
    b, k, _ = gram.shape
    try:
        return np.linalg.cholesky(gram), np.ones(b, dtype=bool)
    except np.linalg.LinAlgError:
        chol = np.empty_like(gram)
        ok = np.zeros(b, dtype=bool)
        eye = np.eye(k, dtype=gram.dtype)
        for i in range(b):
            try:
                chol[i] = np.linalg.cholesky(gram[i])
                ok[i] = True
            except np.linalg.LinAlgError:
                chol[i] = eye
        return chol, ok


def estimation_moments(
    g_true: ChannelMatrix,
    cfg: PilotConfig,
    n_realizations: int,
    rng: np.random.Generator,
    *,
    batch: int = 256,
    cond_limit: float = COND_LIMIT,
):
    """Monte Carlo moments of the couplings v_ki = g_k^T a_i over pilot noise.

    Returns (ev, eabs2, n_used, n_discarded) where ev[k, i] = E{v_ki} and
    eabs2[k, i] = E{|v_ki|^2}. Draws whose Gram matrix fails the Cholesky or
    condition guard are discarded and counted; more than 10% discards raises
    StatisticalValidityError. Batches are accumulated in a fixed order so
    the result depends only on the rng state.
    """
    if n_realizations < 2:
        raise ConfigError(f"need n_realizations >= 2, got {n_realizations}")
    g = g_true.entries
    m, k = g.shape
    if m < k:
        raise SingularMatrixError(f"Gram matrix is rank deficient: M = {m} < K = {k}")
    if cfg.tau_p < k:
        raise ConfigError(f"tau_p = {cfg.tau_p} < K = {k}; pilots must be orthogonal")
    scale = math.sqrt(cfg.sigma2 / 2.0) / math.sqrt(cfg.rho_ul_per_user(k) * cfg.tau_p)
    gt = np.ascontiguousarray(g.T)
    eye = np.eye(k, dtype=complex)

    sum_v = np.zeros((k, k), dtype=complex)
    sum_abs2 = np.zeros((k, k), dtype=float)
    discarded = 0
    for start in range(0, n_realizations, batch):
        b = min(batch, n_realizations - start)
        z = rng.standard_normal((b, m, k, 2)).view(np.complex128)[..., 0]
        gh = g[None, :, :] + scale * z
        gram = np.matmul(gh.conj().transpose(0, 2, 1), gh)
        chol, ok = _batched_cholesky(gram)
        diag = np.einsum("bii->bi", chol).real
        with np.errstate(divide="ignore", invalid="ignore"):
            cond_proxy = (diag.max(axis=1) / diag.min(axis=1)) ** 2
        ok &= np.isfinite(cond_proxy) & (cond_proxy <= cond_limit)
        linv = np.linalg.solve(chol, np.broadcast_to(eye, (b, k, k)))
        hinv = np.matmul(linv.conj().transpose(0, 2, 1), linv)
        trace = np.einsum("bii->b", hinv).real
        a = np.conj(np.matmul(gh, hinv)) / np.sqrt(trace)[:, None, None]
        v = np.matmul(gt[None, :, :], a)
        v_ok = v[ok]
        sum_v += v_ok.sum(axis=0)
        sum_abs2 += (v_ok.real**2 + v_ok.imag**2).sum(axis=0)
        discarded += int(b - ok.sum())

    n_used = n_realizations - discarded
    if discarded > 0.1 * n_realizations or n_used < 2:
        raise StatisticalValidityError(
            f"{discarded} of {n_realizations} draws hit precoder singularities"
        )
    return sum_v / n_used, sum_abs2 / n_used, n_used, discarded


def assemble_sinr(ev: np.ndarray, eabs2: np.ndarray, budget: LinkBudget) -> np.ndarray:
    """SINR per user from coupling moments and a link budget."""
    mean_kk = np.diagonal(ev)
    signal = np.abs(mean_kk) ** 2
    eabs2_kk = np.diagonal(eabs2)
    interference = eabs2.sum(axis=1) - eabs2_kk
    variance = np.maximum(eabs2_kk - signal, 0.0)
    rho = budget.rho_dl
    return rho * signal / (budget.sigma2 + rho * (interference + variance))


def sinr_per_user(
    g_true: ChannelMatrix,
    cfg: PilotConfig,
    budget: LinkBudget,
    n_realizations: int,
    rng: np.random.Generator,
    *,
    batch: int = 256,
    cond_limit: float = COND_LIMIT,
) -> np.ndarray:
    """Monte Carlo SINR per user under imperfect pilot-based estimation."""
    ev, eabs2, _, _ = estimation_moments(
        g_true, cfg, n_realizations, rng, batch=batch, cond_limit=cond_limit
    )
    return assemble_sinr(ev, eabs2, budget)


def rate_per_user(sinr, cfg: PilotConfig) -> np.ndarray:
    """R_k = (1 - tau_p / tau_c) * log2(1 + SINR_k) in bit/s/Hz."""
    sinr = np.asarray(sinr, dtype=float)
    if np.any(sinr < 0):
        raise ConfigError("SINR values must be non-negative")
    return cfg.prelog * np.log2(1.0 + sinr)
