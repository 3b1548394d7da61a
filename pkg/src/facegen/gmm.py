"""Gaussian mixture over identity coefficients: EM fitting with k-means++
initialization and scaled sampling.

The face-shape sampler draws a component by weight and scales the
component's standard deviation by sigma (default 0.8), so the sample
covariance of many draws approaches sigma^2 * Sigma.  A "var" mode that
reads sigma as a variance scale is provided behind the same API.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, solve_triangular
from scipy.special import logsumexp

from .errors import EmptyComponent, InvalidParam, SingularComponent


@dataclass(frozen=True)
class GaussianMixture:
    weights: np.ndarray       # (K,)
    means: np.ndarray         # (K, m)
    covariances: np.ndarray   # (K, m, m)
    ll_trajectory: tuple[float, ...] = ()

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        mu = np.asarray(self.means, dtype=np.float64)
        cov = np.asarray(self.covariances, dtype=np.float64)
        K = len(w)
        if mu.shape[0] != K or cov.shape[0] != K:
            raise InvalidParam("component count mismatch across weights/means/covariances")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-9:
            raise InvalidParam("weights must be positive and sum to 1 within 1e-9")
        if np.any(np.abs(cov - np.swapaxes(cov, 1, 2)) > 1e-9):
            raise InvalidParam("covariances must be symmetric")
        chols = np.empty_like(cov)
        for k in range(K):
            try:
                chols[k] = cholesky(cov[k], lower=True)
            except np.linalg.LinAlgError as e:
                raise SingularComponent(f"component {k} covariance not SPD") from e
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covariances", cov)
        object.__setattr__(self, "_chols", chols)

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def log_prob(self, data: np.ndarray) -> np.ndarray:
        return logsumexp(self._log_joint(data), axis=1)

    def _log_joint(self, data: np.ndarray) -> np.ndarray:
        """log w_k + log N(x | mu_k, Sigma_k), shape (n, K)."""
        data = np.atleast_2d(np.asarray(data, dtype=np.float64))
        n, d = data.shape
        K = self.n_components
        out = np.empty((n, K))
        const = -0.5 * d * np.log(2.0 * np.pi)
        for k in range(K):
            L = self._chols[k]
            sol = solve_triangular(L, (data - self.means[k]).T, lower=True)
            logdet = np.sum(np.log(np.diag(L)))
            out[:, k] = (np.log(self.weights[k]) + const - logdet
                         - 0.5 * np.sum(sol ** 2, axis=0))
        return out


def _kmeanspp_centers(data: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    n = len(data)
    centers = np.empty((K, data.shape[1]))
    centers[0] = data[rng.integers(n)]
    d2 = np.sum((data - centers[0]) ** 2, axis=1)
    for k in range(1, K):
        total = d2.sum()
        if total <= 0:
            centers[k] = data[rng.integers(n)]
        else:
            centers[k] = data[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((data - centers[k]) ** 2, axis=1))
    return centers


def fit_gmm(data: np.ndarray, K: int, seed: int = 0, ridge: float = 1e-6,
            max_iter: int = 200, tol: float = 1e-9) -> GaussianMixture:
    """EM fit with k-means++ init and ridge-regularized covariances.

    The log-likelihood is asserted non-decreasing across EM iterations.
    A component that collapses to zero responsibility is reseeded once
    from a random data point; a second collapse raises EmptyComponent.
    """
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    n, d = data.shape
    if n <= K:
        raise InvalidParam(f"need more samples ({n}) than components ({K})")
    if d < 1 or K < 1:
        raise InvalidParam("need K >= 1 and dimension >= 1")
    rng = np.random.default_rng(seed)

    centers = _kmeanspp_centers(data, K, rng)
    assign = np.argmin(
        np.sum((data[:, None, :] - centers[None]) ** 2, axis=2), axis=1)
    weights = np.empty(K)
    means = np.empty((K, d))
    covs = np.empty((K, d, d))
    global_cov = np.cov(data, rowvar=False, bias=True).reshape(d, d) + ridge * np.eye(d)
    for k in range(K):
        sel = data[assign == k]
        weights[k] = max(len(sel), 1) / n
        means[k] = sel.mean(axis=0) if len(sel) else centers[k]
        if len(sel) > 1:
            covs[k] = np.cov(sel, rowvar=False, bias=True).reshape(d, d) + ridge * np.eye(d)
        else:
            covs[k] = global_cov
    weights /= weights.sum()

    reseeded = False
    just_reseeded = False
    trajectory: list[float] = []
    prev_ll = -np.inf
    for _ in range(max_iter):
        gmm = GaussianMixture(weights, means, covs)
        log_joint = gmm._log_joint(data)
        log_norm = logsumexp(log_joint, axis=1)
        ll = float(log_norm.sum())
        if (trajectory and not just_reseeded
                and ll < prev_ll - 1e-9 * max(1.0, abs(prev_ll))):
            raise SingularComponent(
                f"EM log-likelihood decreased: {prev_ll} -> {ll}")
        just_reseeded = False
        trajectory.append(ll)
        resp = np.exp(log_joint - log_norm[:, None])

        nk = resp.sum(axis=0)
        empty = nk < 1e-10
        if np.any(empty):
            if reseeded:
                raise EmptyComponent(
                    f"{int(empty.sum())} component(s) collapsed twice during EM")
            reseeded = True
            just_reseeded = True
            for k in np.nonzero(empty)[0]:
                means[k] = data[rng.integers(n)]
                covs[k] = global_cov
                weights[k] = 1.0 / n
            weights /= weights.sum()
            prev_ll = ll
            continue

        weights = nk / n
        means = (resp.T @ data) / nk[:, None]
        for k in range(K):
            delta = data - means[k]
            covs[k] = (resp[:, k, None] * delta).T @ delta / nk[k]
            covs[k] = 0.5 * (covs[k] + covs[k].T) + ridge * np.eye(d)

        if trajectory and abs(ll - prev_ll) <= tol * max(1.0, abs(ll)) and len(trajectory) > 1:
            prev_ll = ll
            break
        prev_ll = ll

    return GaussianMixture(weights, means, covs, ll_trajectory=tuple(trajectory))


def sample_identity(gmm: GaussianMixture, sigma: float = 0.8,
                    rng: np.random.Generator | int | None = None,
                    size: int | None = None,
                    sigma_mode: str = "std") -> np.ndarray:
    """Draw identity coefficients: pick a component by weight, then sample
    mean + scale * L z with L the covariance Cholesky factor.

    sigma_mode "std" scales the standard deviation by sigma (covariance by
    sigma^2); "var" reads sigma as a variance scale (std by sqrt(sigma)).
    """
    if sigma_mode not in ("std", "var"):
        raise InvalidParam(f"unknown sigma_mode {sigma_mode!r}")
    scale = sigma if sigma_mode == "std" else float(np.sqrt(sigma))
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    n = 1 if size is None else size
    comps = rng.choice(gmm.n_components, size=n, p=gmm.weights)
    z = rng.standard_normal((n, gmm.dim))
    chols = gmm._chols
    out = gmm.means[comps] + scale * np.einsum("nab,nb->na", chols[comps], z)
    return out[0] if size is None else out
