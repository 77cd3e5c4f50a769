"""Covariance-matrix toolbox for two-mode Gaussian states and measurements.

Conventions, used everywhere in this package:

* quadrature ordering (q1, p1, q2, p2, ...), one 2x2 block per mode;
* vacuum variance normalised to 1, so the vacuum/heterodyne covariance is
  the identity and a matrix V is physical iff V > 0 and V + i*Omega >= 0;
* mode indices are 0-based.
"""

import json
from dataclasses import dataclass, field

import numpy as np

SYMMETRY_RTOL = 1e-12
DEFAULT_TOL = 1e-9


class NotBonaFideError(ValueError):
    """Raised when an operation requires a physical covariance matrix."""


def as_matrix(v):
    """Return the underlying ndarray of a CovMatrix, passing arrays through."""
    return v.data if isinstance(v, CovMatrix) else np.asarray(v, dtype=float)


@dataclass
class CovMatrix:
    """Real symmetric 2n x 2n matrix in (q1, p1, q2, p2, ...) ordering."""

    data: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.data, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2 or m.shape[0] == 0:
            raise ValueError(f"covariance matrix must be square with even dimension, got {m.shape}")
        scale = max(1.0, float(np.abs(m).max()))
        if np.abs(m - m.T).max() > SYMMETRY_RTOL * scale:
            raise ValueError("covariance matrix is not symmetric")
        m = 0.5 * (m + m.T)
        m.flags.writeable = False
        self.data = m

    @property
    def n_modes(self) -> int:
        return self.data.shape[0] // 2

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def to_json(self) -> str:
        return json.dumps({"n_modes": self.n_modes, "data": self.data.ravel().tolist()})

    @classmethod
    def from_json(cls, text: str) -> "CovMatrix":
        obj = json.loads(text)
        n = int(obj["n_modes"])
        data = np.array(obj["data"], dtype=float).reshape(2 * n, 2 * n)
        return cls(data)


@dataclass
class ModePartition:
    """Disjoint split of mode indices into a left and a right party."""

    left_modes: tuple
    right_modes: tuple

    def __post_init__(self):
        self.left_modes = tuple(sorted(self.left_modes))
        self.right_modes = tuple(sorted(self.right_modes))
        if set(self.left_modes) & set(self.right_modes):
            raise ValueError("left and right mode sets overlap")

    def validate(self, n_modes: int):
        if set(self.left_modes) | set(self.right_modes) != set(range(n_modes)):
            raise ValueError(
                f"partition {self.left_modes}|{self.right_modes} does not cover modes 0..{n_modes - 1}"
            )

    def tile(self, n_copies: int, n_modes: int) -> "ModePartition":
        """Extend the partition to n_copies block-diagonal copies."""
        left = [m + i * n_modes for i in range(n_copies) for m in self.left_modes]
        right = [m + i * n_modes for i in range(n_copies) for m in self.right_modes]
        return ModePartition(tuple(left), tuple(right))


TWO_MODE_SPLIT = ModePartition((0,), (1,))


@dataclass
class EigSpectrum:
    """Eigenvalues in descending order with orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@dataclass
class FeasibilityReport:
    """Verdict plus the eigenvalue margins backing it."""

    ok: bool
    min_eig: float
    min_eig_heisenberg: float

    def __bool__(self):
        return self.ok


@dataclass
class PptReport:
    ok: bool
    violating_eig: float

    def __bool__(self):
        return self.ok


def symplectic_form(n_modes: int) -> np.ndarray:
    """Block-diagonal Omega with per-mode blocks [[0, 1], [-1, 0]]."""
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def is_bona_fide(v, tol: float = DEFAULT_TOL) -> FeasibilityReport:
    """Check positivity and the uncertainty relation V + i*Omega >= 0."""
    m = as_matrix(v)
    omega = symplectic_form(m.shape[0] // 2)
    if m.shape != omega.shape:
        raise ValueError("dimension mismatch between V and Omega")
    min_eig = float(np.linalg.eigvalsh(m).min())
    min_heis = float(np.linalg.eigvalsh(m + 1j * omega).min())
    return FeasibilityReport(min_eig > tol and min_heis >= -tol, min_eig, min_heis)


def partial_transpose(v, part: ModePartition = TWO_MODE_SPLIT):
    """Flip the sign of every momentum quadrature of the right party.

    The sign bookkeeping is exact, so applying the map twice returns the
    input bit for bit.
    """
    m = as_matrix(v)
    n = m.shape[0] // 2
    part.validate(n)
    t = np.ones(2 * n)
    for mode in part.right_modes:
        t[2 * mode + 1] = -1.0
    out = t[:, None] * m * t[None, :]
    return CovMatrix(out) if isinstance(v, CovMatrix) else out


def is_ppt(v, part: ModePartition = TWO_MODE_SPLIT, tol: float = DEFAULT_TOL) -> PptReport:
    """Positive-partial-transpose test: min eig of T V T + i*Omega.

    Raises NotBonaFideError for unphysical input; the PPT verdict of a
    matrix that is not a covariance matrix has no meaning.
    """
    m = as_matrix(v)
    report = is_bona_fide(m, tol)
    if not report.ok:
        raise NotBonaFideError(
            f"PPT test on unphysical matrix (min eig {report.min_eig:.3e}, "
            f"uncertainty margin {report.min_eig_heisenberg:.3e})"
        )
    tvt = partial_transpose(m, part)
    omega = symplectic_form(m.shape[0] // 2)
    min_eig = float(np.linalg.eigvalsh(tvt + 1j * omega).min())
    return PptReport(min_eig >= -tol, min_eig)


def ppt_violation_formula(lam3: float, lam4: float) -> float:
    """Closed-form eigenvalue of T V T + i*Omega for the aligned ansatz."""
    return 0.5 * (lam3 + lam4 - np.sqrt(4.0 + (lam3 - lam4) ** 2))


def symplectic_eigenvalues(v) -> np.ndarray:
    """Symplectic spectrum, ascending.

    Computed from the Hermitian matrix i L^T Omega L with V = L L^T, which
    is much better conditioned than |eig(i Omega V)| for nearly singular V.
    """
    m = as_matrix(v)
    omega = symplectic_form(m.shape[0] // 2)
    try:
        chol = np.linalg.cholesky(m)
        ev = np.linalg.eigvalsh(1j * (chol.T @ omega @ chol))
        return np.sort(ev[ev > 0])
    except np.linalg.LinAlgError:
        ev = np.abs(np.linalg.eigvals(1j * omega @ m))
        return np.sort(ev)[::2]


def tmsv_cov(s: float) -> CovMatrix:
    """Two-mode squeezed vacuum covariance for squeezing parameter s."""
    c, sh = np.cosh(2.0 * s), np.sinh(2.0 * s)
    z = np.diag([1.0, -1.0])
    eye = np.eye(2)
    return CovMatrix(np.block([[c * eye, sh * z], [sh * z, c * eye]]))


def tmsv_eigenvectors() -> np.ndarray:
    """Columns: the fixed eigenvectors shared by every tmsv_cov(s)."""
    return np.array(
        [
            [0.0, 1.0, 0.0, -1.0],
            [-1.0, 0.0, 1.0, 0.0],
            [0.0, 1.0, 0.0, 1.0],
            [1.0, 0.0, 1.0, 0.0],
        ]
    ) / np.sqrt(2.0)


def tmsv_spectrum(s: float) -> EigSpectrum:
    """Eigenpairs of tmsv_cov(s): e^{2s} twice, e^{-2s} twice."""
    vecs = tmsv_eigenvectors()
    vals = np.array([np.exp(2 * s), np.exp(2 * s), np.exp(-2 * s), np.exp(-2 * s)])
    if s < 0:
        vals = vals[::-1]
        vecs = vecs[:, ::-1]
    return EigSpectrum(vals, vecs)


def epr_basis() -> np.ndarray:
    """Orthogonal map onto (q1-q2, q1+q2, p1-p2, p1+p2)/sqrt(2).

    Diagonalises tmsv_cov(s) to diag(e^{-2s}, e^{2s}, e^{2s}, e^{-2s}) and
    the weak thermal pair to diag(1, 1+2eps, 1, 1+2eps) / swapped.
    """
    return np.array(
        [
            [1.0, 0.0, -1.0, 0.0],
            [1.0, 0.0, 1.0, 0.0],
            [0.0, 1.0, 0.0, -1.0],
            [0.0, 1.0, 0.0, 1.0],
        ]
    ) / np.sqrt(2.0)


def nonlocal_epr_measurement(delta: float) -> CovMatrix:
    """Joint homodyne of q1-q2 and p1+p2 at finite resolution delta.

    Bona fide for every delta > 0 (a pure-state covariance), never PPT for
    delta < 1. Valid stand-in for the ideal measurement while
    e^{-2s} >> delta.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    vecs = tmsv_eigenvectors()
    big = vecs[:, 0:1] @ vecs[:, 0:1].T + vecs[:, 1:2] @ vecs[:, 1:2].T
    small = vecs[:, 2:3] @ vecs[:, 2:3].T + vecs[:, 3:4] @ vecs[:, 3:4].T
    return CovMatrix(big / delta + small * delta)


def ansatz_measurement(lam1: float, lam2: float, lam3: float, lam4: float,
                       x1: float = 1.0, x3: float = 1.0) -> CovMatrix:
    """Measurement covariance built on the TMSV eigenvector family.

    lam1, lam2 weight the mixing of the two large-noise directions, lam3,
    lam4 the two squeezed ones; x1, x3 set the mixing angles inside each
    degenerate pair. ppt_violation_formula(lam3, lam4) is an exact
    eigenvalue of the partially transposed matrix plus i*Omega for every
    member of this family.
    """
    if not (abs(x1) <= 1 and abs(x3) <= 1):
        raise ValueError("mixing coefficients must lie in [-1, 1]")
    w = tmsv_eigenvectors()
    y1 = np.sqrt(1.0 - x1 * x1)
    y3 = np.sqrt(1.0 - x3 * x3)
    u1 = x1 * w[:, 0] + y1 * w[:, 1]
    u2 = y1 * w[:, 0] - x1 * w[:, 1]
    u3 = x3 * w[:, 2] + y3 * w[:, 3]
    u4 = y3 * w[:, 2] - x3 * w[:, 3]
    out = (
        lam1 * np.outer(u1, u1)
        + lam2 * np.outer(u2, u2)
        + lam3 * np.outer(u3, u3)
        + lam4 * np.outer(u4, u4)
    )
    return CovMatrix(out)


def local_homodyne_measurement(delta: float, dir1=(1.0, 0.0), dir2=(1.0, 0.0)) -> CovMatrix:
    """Per-mode homodyne with resolution delta along the given directions.

    dir1/dir2 are (q, p) direction vectors for mode 1 and mode 2; the
    orthogonal quadrature carries the conjugate noise 1/delta.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    out = np.zeros((4, 4))
    for k, d in enumerate((dir1, dir2)):
        u = np.asarray(d, dtype=float)
        u = u / np.linalg.norm(u)
        perp = np.array([-u[1], u[0]])
        block = delta * np.outer(u, u) + np.outer(perp, perp) / delta
        out[2 * k: 2 * k + 2, 2 * k: 2 * k + 2] = block
    return CovMatrix(out)


def heterodyne_measurement(n_modes: int = 2) -> CovMatrix:
    """Coherent-state projection: identity covariance."""
    return CovMatrix(np.eye(2 * n_modes))


def thermal_pair_cov(eps: float, sign: int) -> CovMatrix:
    """Covariance of the weak two-mode thermal hiding state, sign = +-1."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    eye = np.eye(2)
    return CovMatrix(
        np.block([[(1 + eps) * eye, sign * eps * eye], [sign * eps * eye, (1 + eps) * eye]])
    )


MULTI_COPY_CAP = 10_000


def multi_copy_cov(v, n_copies: int, cap: int = MULTI_COPY_CAP):
    """Direct sum of n_copies identical blocks."""
    if n_copies < 1:
        raise ValueError("n_copies must be >= 1")
    if n_copies > cap:
        raise ValueError(f"n_copies {n_copies} exceeds cap {cap}")
    m = as_matrix(v)
    out = np.kron(np.eye(n_copies), m)
    return CovMatrix(out) if isinstance(v, CovMatrix) else out


def random_bona_fide_cov(rng, n_modes: int = 2, nu_range=(1.0, 3.0),
                         squeeze_max: float = 1.0, local: bool = False) -> CovMatrix:
    """Random physical covariance via a symplectic conjugation of a Williamson form.

    local=True restricts the conjugation to per-mode symplectics, which
    always yields a separable (hence PPT) two-mode state.
    """
    nus = rng.uniform(*nu_range, size=n_modes)
    d = np.repeat(nus, 2)
    s = random_symplectic(rng, n_modes, squeeze_max=squeeze_max, local=local)
    return CovMatrix(s @ np.diag(d) @ s.T)


def random_symplectic(rng, n_modes: int, squeeze_max: float = 1.0, local: bool = False) -> np.ndarray:
    """Haar-ish random symplectic: orthogonal * squeezer * orthogonal."""
    if local:
        blocks = [random_symplectic(rng, 1, squeeze_max) for _ in range(n_modes)]
        out = np.zeros((2 * n_modes, 2 * n_modes))
        for k, b in enumerate(blocks):
            out[2 * k: 2 * k + 2, 2 * k: 2 * k + 2] = b
        return out
    r = rng.uniform(-squeeze_max, squeeze_max, size=n_modes)
    sq = np.diag(np.repeat(np.exp(r), 2) ** np.tile([1.0, -1.0], n_modes))
    return _random_orthosymplectic(rng, n_modes) @ sq @ _random_orthosymplectic(rng, n_modes)


def _random_orthosymplectic(rng, n_modes: int) -> np.ndarray:
    """Orthogonal symplectic matrix from a Haar-random unitary."""
    z = rng.normal(size=(n_modes, n_modes)) + 1j * rng.normal(size=(n_modes, n_modes))
    q, r = np.linalg.qr(z)
    q = q * (np.diagonal(r) / np.abs(np.diagonal(r)))
    # qqpp-ordered real representation, then permute to qpqp
    big = np.block([[q.real, -q.imag], [q.imag, q.real]])
    perm = np.argsort([2 * m for m in range(n_modes)] + [2 * m + 1 for m in range(n_modes)])
    return big[np.ix_(perm, perm)]
