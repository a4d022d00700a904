"""Dense matrix numerics shared by every other module.

Matrices are plain numpy arrays. The helpers here add the shape, symmetry and
finiteness checks the rest of the package relies on, and fix the tolerances
used for ranks and pseudo-inverses.
"""

import numpy as np
import scipy.linalg

from core.errors import DimensionError
from core.errors import NumericalError

SYM_TOL = 1e-10
PINV_RTOL = 1e-10
RANK_RTOL = 1e-8


def as_matrix(a, name="matrix", dtype=float):
    """Convert nested lists or arrays to a finite 2-D array."""
    arr = np.array(a, dtype=dtype)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(0, 0)
    if arr.ndim != 2:
        raise DimensionError("%s must be 2-D, got shape %s" % (name, arr.shape))
    if not np.all(np.isfinite(arr)):
        raise DimensionError("%s has non-finite entries" % name)
    return arr


def check_square(a, name="matrix"):
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError("%s must be square, got shape %s" % (name, a.shape))
    return a


def sym(m):
    """Return M + M^T (conjugate transpose for complex input)."""
    m = np.asarray(m)
    check_square(m, "sym() argument")
    return m + m.conj().T


def is_symmetric(m, tol=SYM_TOL):
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return m.size == 0 or float(np.max(np.abs(m - m.conj().T))) <= tol


class Spectrum(object):
    """Unordered eigenvalues of a square matrix."""

    def __init__(self, eigenvalues):
        self.eigenvalues = np.asarray(eigenvalues, dtype=complex)

    def __len__(self):
        return len(self.eigenvalues)

    def __iter__(self):
        return iter(self.eigenvalues)

    @property
    def min_abs_arg(self):
        """Smallest |arg(lambda)|; pi for an empty spectrum."""
        if len(self.eigenvalues) == 0:
            return np.pi
        return float(np.min(np.abs(np.angle(self.eigenvalues))))

    @property
    def max_real(self):
        return float(np.max(self.eigenvalues.real))

    def __repr__(self):
        return "Spectrum(%s)" % np.array2string(self.eigenvalues, precision=4)


def eigenvalues(a):
    a = check_square(as_matrix(a, "eigenvalues() argument"))
    try:
        vals = scipy.linalg.eigvals(a)
    except (scipy.linalg.LinAlgError, ValueError) as e:
        raise NumericalError("eigenvalue iteration failed: %s" % e)
    return Spectrum(vals)


def pinv(a):
    """Moore-Penrose pseudo-inverse with singular values below
    PINV_RTOL * sigma_max truncated."""
    a = np.asarray(a)
    if a.size == 0:
        return np.zeros((a.shape[1], a.shape[0]), dtype=a.dtype)
    return scipy.linalg.pinv(a, atol=0.0, rtol=PINV_RTOL)


def min_eig(m):
    """Smallest eigenvalue of a symmetric/Hermitian matrix."""
    m = np.asarray(m)
    if m.size == 0:
        return np.inf
    return float(scipy.linalg.eigvalsh(m)[0])


def max_eig(m):
    m = np.asarray(m)
    if m.size == 0:
        return -np.inf
    return float(scipy.linalg.eigvalsh(m)[-1])


def is_posdef(m, margin=0.0):
    """True iff the smallest eigenvalue of M exceeds ``margin``."""
    m = np.asarray(m)
    if not is_symmetric(m):
        raise DimensionError("is_posdef() needs a symmetric/Hermitian matrix")
    return min_eig(m) > margin


def rank(a, rtol=RANK_RTOL):
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return 0
    s = scipy.linalg.svdvals(a)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def row_space_split(c, rtol=RANK_RTOL):
    """Orthonormal bases (V_r, V_perp) of the row space and null space of C.

    V_r is n x r and V_perp is n x (n - r), with r the numerical rank of C.
    """
    c = np.asarray(c, dtype=float)
    n = c.shape[1]
    if c.size == 0:
        return np.zeros((n, 0)), np.eye(n)
    _, s, vt = scipy.linalg.svd(c)
    r = 0 if s[0] == 0.0 else int(np.sum(s > rtol * s[0]))
    return vt[:r].T.copy(), vt[r:].T.copy()


def controllability_matrix(a, b):
    n = a.shape[0]
    blocks = [b]
    for _ in range(1, n):
        blocks.append(a @ blocks[-1])
    return np.hstack(blocks)


def observability_matrix(a, c):
    n = a.shape[0]
    blocks = [c]
    for _ in range(1, n):
        blocks.append(blocks[-1] @ a)
    return np.vstack(blocks)
