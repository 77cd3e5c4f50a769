"""Weak two-mode thermal hiding states and the measurements that break them.

A bit is hidden in the sign of the cross-mode correlation of a weak thermal
pair. The photon-counting projection onto {|00>, |+>, |->} reveals it after
N ~ 1/eps copies, while the KL machinery here bounds every Gaussian
measurement to total variation sqrt(2N)*eps, so Gaussian strategies need
N ~ 1/eps^2.

Multi-copy measurement covariances live in the rotated basis that
diagonalises both hiding states; they are grouped in four blocks of N modes
and may be passed as full (4N, 4N) matrices or as length-4N diagonals.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .gauss import as_matrix
from .metrics import TVEstimate, gaussian_kl, tv_gaussian_pair_mc

EPR_LIMIT_SQUEEZING = 15.0


@dataclass
class ThermalParams:
    """Parameters of the hiding pair: photon number, coherence, phase, copies."""

    eps: float
    g: float = 1.0
    theta: float = 0.0
    n_copies: int = 1

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if not (0.0 <= self.g <= 1.0):
            raise ValueError("g must lie in [0, 1]")
        if self.n_copies < 1:
            raise ValueError("n_copies must be >= 1")


@dataclass
class FockBlock:
    """Leading photon-number content: vacuum weight and one-photon coherences."""

    p_vac: float
    coherence_block: np.ndarray


@dataclass
class CountsOutcome:
    """Outcome of counting measurements on N copies: k vacua, m plus events."""

    k: int
    m: int
    n_copies: int

    def __post_init__(self):
        if not (0 <= self.k <= self.n_copies and 0 <= self.m <= self.n_copies - self.k):
            raise ValueError(f"invalid counts (k={self.k}, m={self.m}, N={self.n_copies})")


def fock_expansion(p: ThermalParams) -> FockBlock:
    """Photon-number expansion truncated after the one-photon sector."""
    phase = p.g * np.exp(1j * p.theta)
    block = 0.5 * p.eps * np.array([[1.0, phase], [np.conj(phase), 1.0]])
    return FockBlock(1.0 - p.eps, block)


def povm_probs(p: ThermalParams):
    """Outcome probabilities of the projection onto {|00>, |+>, |->}."""
    gcos = p.g * np.cos(p.theta)
    return 1.0 - p.eps, 0.5 * p.eps * (1.0 + gcos), 0.5 * p.eps * (1.0 - gcos)


def counts_prob(k: int, m: int, p: ThermalParams) -> float:
    """Multinomial probability of k vacua and m plus events over N copies.

    Evaluated in log space so N ~ 1000 stays finite; zero-probability
    outcomes (possible at g = 1 with theta in {0, pi}) return exactly 0.
    """
    CountsOutcome(k, m, p.n_copies)
    n = p.n_copies
    p_vac, p_plus, p_minus = povm_probs(p)
    counts = np.array([k, m, n - k - m])
    probs = np.array([p_vac, p_plus, p_minus])
    if np.any((probs == 0.0) & (counts > 0)):
        return 0.0
    log_coef = gammaln(n + 1) - gammaln(counts + 1).sum()
    with np.errstate(divide="ignore"):
        log_terms = np.where(counts > 0, counts * np.log(np.maximum(probs, 1e-300)), 0.0)
    return float(np.exp(log_coef + log_terms.sum()))


def tv_nongaussian(n_copies: int, eps: float) -> float:
    """Exact total variation of the counting scheme: 1 - (1 - eps)^N."""
    if n_copies < 1:
        raise ValueError("n_copies must be >= 1")
    if not (0.0 < eps < 1.0):
        raise ValueError("eps must lie in (0, 1)")
    return float(-np.expm1(n_copies * np.log1p(-eps)))


def simulate_povm(p: ThermalParams, sign: int, n_trials: int, seed: int = 0) -> TVEstimate:
    """Empirical total variation of the counting scheme from sampled trials.

    The phase is fixed to 0 or pi by ``sign``; both hiding states are
    simulated for n_trials each. Each trial is classified by likelihood
    ratio: the majority of non-vacuum events decides the sign and an
    all-vacuum record falls back to a coin flip.
    """
    if n_trials < 1_000:
        raise ValueError("n_trials must be >= 1000")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    rng = np.random.Generator(np.random.Philox(key=seed))
    n = p.n_copies

    def correct_rate(theta):
        params = ThermalParams(p.eps, p.g, theta, n)
        _, p_plus, p_minus = povm_probs(params)
        k = rng.binomial(n, 1.0 - p.eps, size=n_trials)
        nonvac = n - k
        frac_plus = p_plus / (p_plus + p_minus) if p_plus + p_minus > 0 else 0.5
        m = rng.binomial(nonvac, frac_plus)
        minus = nonvac - m
        guess_plus = m > minus
        ties = m == minus
        coin = rng.random(n_trials) < 0.5
        guess_plus = np.where(ties, coin, guess_plus)
        want_plus = np.cos(theta) > 0
        return float(np.mean(guess_plus == want_plus))

    # sign only fixes which state is labelled "+"; simulate both arms
    p1 = correct_rate(0.0 if sign == 1 else np.pi)
    p2 = correct_rate(np.pi if sign == 1 else 0.0)
    tv = max(p1 + p2 - 1.0, 0.0)
    err = np.sqrt(p1 * (1 - p1) / n_trials + p2 * (1 - p2) / n_trials)
    return TVEstimate(tv, max(float(err), 1e-12), "monte-carlo", n_samples=2 * n_trials,
                      params={"eps": p.eps, "n_copies": n, "seed": seed})


def rotated_state_diag(n_copies: int, eps: float, sign: int) -> np.ndarray:
    """Diagonal of the hiding-state covariance in the rotated block basis."""
    hot = np.full(n_copies, 1.0 + 2.0 * eps)
    cold = np.ones(n_copies)
    if sign == 1:
        return np.concatenate([cold, hot, cold, hot])
    return np.concatenate([hot, cold, hot, cold])


def sigma_heterodyne(n_copies: int) -> np.ndarray:
    """Per-mode heterodyne: identity noise in the rotated basis."""
    return np.ones(4 * n_copies)


def sigma_epr_homodyne(n_copies: int, s: float = EPR_LIMIT_SQUEEZING) -> np.ndarray:
    """Beam-splitter-plus-homodyne measurement at large finite squeezing s."""
    lo = np.full(n_copies, np.exp(-2.0 * s))
    hi = np.full(n_copies, np.exp(2.0 * s))
    return np.concatenate([lo, hi, hi, lo])


def sigma_saturator(n_copies: int, s: float = EPR_LIMIT_SQUEEZING) -> np.ndarray:
    """All-quadrature resolver e^{-2s} I: saturates the KL bound, unphysical."""
    return np.full(4 * n_copies, np.exp(-2.0 * s))


# sign pattern of (B1 - B2)/2 over the four blocks
_BLOCK_SIGNS = np.array([-1.0, 1.0, -1.0, 1.0])


def _as_sigma(sigma_pi, n_copies: int):
    """Accept a length-4N diagonal or a (4N, 4N) matrix; tag which it was."""
    arr = as_matrix(sigma_pi) if not isinstance(sigma_pi, np.ndarray) else np.asarray(sigma_pi, float)
    dim = 4 * n_copies
    if arr.ndim == 1:
        if arr.size != dim:
            raise ValueError(f"diagonal length {arr.size} does not match 4N = {dim}")
        return arr, True
    if arr.shape != (dim, dim):
        raise ValueError(f"shape {arr.shape} does not match 4N = {dim}")
    if np.count_nonzero(arr - np.diag(np.diagonal(arr))) == 0:
        return np.diagonal(arr).copy(), True
    return arr, False


def _block_sign_vector(n_copies: int) -> np.ndarray:
    return np.repeat(_BLOCK_SIGNS, n_copies)


def kl_quadratic(sigma_pi, n_copies: int, eps: float) -> float:
    """Leading-order KL divergence (eps^2/4) tr(A^-1 dB A^-1 dB), A = I + Sigma.

    The block difference dB is carried as a sign vector, never materialised,
    so diagonal measurement covariances evaluate in O(N).
    """
    sig, diagonal = _as_sigma(sigma_pi, n_copies)
    j = _block_sign_vector(n_copies)
    if diagonal:
        inv = 1.0 / (1.0 + sig)
        return float(eps**2 * np.sum(inv * inv))
    inv = np.linalg.inv(np.eye(4 * n_copies) + sig)
    return float(eps**2 * np.sum((inv * inv.T) * np.outer(j, j)))


def kl_exact_vs_quadratic(sigma_pi, n_copies: int, eps: float):
    """Exact Gaussian KL, its quadratic approximation, and their difference."""
    sig, diagonal = _as_sigma(sigma_pi, n_copies)
    sig_mat = np.diag(sig) if diagonal else sig
    s_plus = np.diag(rotated_state_diag(n_copies, eps, +1)) + sig_mat
    s_minus = np.diag(rotated_state_diag(n_copies, eps, -1)) + sig_mat
    exact = gaussian_kl(s_plus, s_minus)
    quad = kl_quadratic(sigma_pi, n_copies, eps)
    return exact, quad, exact - quad


def kl_upper_bound(n_copies: int, eps: float) -> float:
    """Measurement-independent KL ceiling 4 N eps^2."""
    return 4.0 * n_copies * eps**2


def tv_upper_bound(n_copies: int, eps: float) -> float:
    """Pinsker image of the KL ceiling: sqrt(2N) eps."""
    return float(np.sqrt(2.0 * n_copies) * eps)


def simulate_gaussian_tv(sigma_pi, n_copies: int, eps: float,
                         n_trials: int = 100_000, seed: int = 0) -> TVEstimate:
    """Empirical TV achieved by a Gaussian measurement on the hiding pair."""
    sig, diagonal = _as_sigma(sigma_pi, n_copies)
    sig_mat = np.diag(sig) if diagonal else sig
    s_plus = np.diag(rotated_state_diag(n_copies, eps, +1)) + sig_mat
    s_minus = np.diag(rotated_state_diag(n_copies, eps, -1)) + sig_mat
    est = tv_gaussian_pair_mc(s_plus, s_minus, n_samples=n_trials, seed=seed)
    est.params.update({"eps": eps, "n_copies": n_copies})
    return est
