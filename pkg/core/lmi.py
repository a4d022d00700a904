"""Affine matrix expressions and LMI problems over a flat decision vector.

An ``AffineMatrixExpr`` stores its coefficients as one array of shape
(nvars + 1, rows, cols): slot 0 is the constant term F0 and slot i + 1 the
coefficient of decision scalar x_i, so F(x) = F0 + sum_i x_i F_i. Expressions
combine with +, -, scalar * and matrix @ the way the matrices they stand for
do, which keeps the block formulas in the builders close to the math.
"""

import logging
from collections import OrderedDict
from collections import namedtuple

import numpy as np

from core.errors import ConfigError
from core.errors import DimensionError
from core.matnum import SYM_TOL
from core.matnum import max_eig
from core.matnum import min_eig

logger = logging.getLogger(__name__)

NEGDEF = "negdef"
POSDEF = "posdef"
DEFAULT_MARGIN = 1e-6


class AffineMatrixExpr(object):

    # keep numpy from broadcasting over expressions; ndarray @ expr and
    # ndarray + expr then dispatch to the reflected methods below
    __array_ufunc__ = None

    def __init__(self, coeffs):
        coeffs = np.asarray(coeffs)
        if coeffs.ndim != 3:
            raise DimensionError("coefficient stack must be 3-D, got %s" % (coeffs.shape,))
        self.coeffs = coeffs

    @classmethod
    def constant(cls, nvars, mat):
        mat = np.atleast_2d(np.asarray(mat))
        coeffs = np.zeros((nvars + 1,) + mat.shape, dtype=np.result_type(mat, float))
        coeffs[0] = mat
        return cls(coeffs)

    @property
    def nvars(self):
        return self.coeffs.shape[0] - 1

    @property
    def shape(self):
        return self.coeffs.shape[1:]

    @property
    def F0(self):
        return self.coeffs[0]

    @property
    def terms(self):
        """Nonzero coefficient matrices keyed by decision-scalar index."""
        return {i: self.coeffs[i + 1] for i in range(self.nvars)
                if np.any(self.coeffs[i + 1] != 0)}

    @property
    def is_complex(self):
        return np.iscomplexobj(self.coeffs)

    def _lift(self, other):
        if isinstance(other, AffineMatrixExpr):
            if other.nvars != self.nvars:
                raise DimensionError("expressions live in different variable spaces "
                                     "(%d vs %d scalars)" % (self.nvars, other.nvars))
            return other
        return AffineMatrixExpr.constant(self.nvars, other)

    def _check_same_shape(self, other):
        if other.shape != self.shape:
            raise DimensionError("shape mismatch: %s vs %s" % (self.shape, other.shape))

    def __add__(self, other):
        other = self._lift(other)
        self._check_same_shape(other)
        return AffineMatrixExpr(self.coeffs + other.coeffs)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._lift(other)
        self._check_same_shape(other)
        return AffineMatrixExpr(self.coeffs - other.coeffs)

    def __rsub__(self, other):
        return self._lift(other) - self

    def __neg__(self):
        return AffineMatrixExpr(-self.coeffs)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            raise TypeError("use @ for matrix products")
        return AffineMatrixExpr(self.coeffs * scalar)

    __rmul__ = __mul__

    def __matmul__(self, mat):
        mat = np.asarray(mat)
        if mat.ndim != 2 or mat.shape[0] != self.shape[1]:
            raise DimensionError("cannot right-multiply %s by %s" % (self.shape, mat.shape))
        return AffineMatrixExpr(np.matmul(self.coeffs, mat))

    def __rmatmul__(self, mat):
        mat = np.asarray(mat)
        if mat.ndim != 2 or mat.shape[1] != self.shape[0]:
            raise DimensionError("cannot left-multiply %s by %s" % (self.shape, mat.shape))
        return AffineMatrixExpr(np.matmul(mat, self.coeffs))

    @property
    def T(self):
        return AffineMatrixExpr(np.swapaxes(self.coeffs, 1, 2))

    @property
    def H(self):
        return AffineMatrixExpr(np.swapaxes(self.coeffs, 1, 2).conj())

    def conj(self):
        return AffineMatrixExpr(self.coeffs.conj())

    @property
    def real(self):
        return AffineMatrixExpr(self.coeffs.real.copy())

    @property
    def imag(self):
        return AffineMatrixExpr(self.coeffs.imag.copy())

    def eye(self, k):
        """Scalar (1x1) expression times the k x k identity."""
        if self.shape != (1, 1):
            raise DimensionError("eye() needs a 1x1 expression, got %s" % (self.shape,))
        return AffineMatrixExpr(self.coeffs[:, 0:1, 0:1] * np.eye(k))

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.nvars,):
            raise DimensionError("assignment has %s entries, expected %d" % (x.shape, self.nvars))
        return self.coeffs[0] + np.tensordot(x, self.coeffs[1:], axes=1)

    def is_symmetric(self, tol=SYM_TOL):
        if self.shape[0] != self.shape[1]:
            return False
        gap = np.abs(self.coeffs - np.swapaxes(self.coeffs, 1, 2).conj())
        return gap.size == 0 or float(np.max(gap)) <= tol * max(1.0, float(np.max(np.abs(self.coeffs))))

    def __repr__(self):
        return "AffineMatrixExpr(shape=%s, nvars=%d)" % (self.shape, self.nvars)


VarBlock = namedtuple("VarBlock", ["name", "kind", "shape", "offset", "size"])


class VarSpace(object):
    """Named blocks of decision variables packed into one flat vector."""

    KINDS = ("symmetric", "full", "scalar", "skew", "hermitian")

    def __init__(self):
        self._blocks = OrderedDict()
        self._size = 0
        self._frozen = False

    def declare(self, name, kind, shape=None):
        if name in self._blocks:
            raise ConfigError("variable %r declared twice" % name)
        if self._frozen:
            raise ConfigError("cannot declare %r after expressions were built" % name)
        if kind not in self.KINDS:
            raise ConfigError("unknown variable kind %r" % kind)
        if kind == "scalar":
            shape, size = (1, 1), 1
        elif kind == "full":
            r, c = (int(s) for s in shape)
            shape, size = (r, c), r * c
        else:
            n = int(shape[0] if isinstance(shape, (tuple, list)) else shape)
            shape = (n, n)
            size = {"symmetric": n * (n + 1) // 2,
                    "skew": n * (n - 1) // 2,
                    "hermitian": n * n}[kind]
        block = VarBlock(name, kind, shape, self._size, size)
        self._blocks[name] = block
        self._size += size
        return block

    @property
    def size(self):
        return self._size

    @property
    def blocks(self):
        return list(self._blocks.values())

    def __contains__(self, name):
        return name in self._blocks

    def __getitem__(self, name):
        return self._blocks[name]

    def var(self, name):
        """The block as an expression; freezes the space."""
        self._frozen = True
        b = self._blocks[name]
        r, c = b.shape
        dtype = complex if b.kind == "hermitian" else float
        coeffs = np.zeros((self._size + 1, r, c), dtype=dtype)
        k = b.offset + 1
        if b.kind in ("scalar", "full"):
            for i in range(r):
                for j in range(c):
                    coeffs[k, i, j] = 1.0
                    k += 1
        if b.kind in ("symmetric", "hermitian"):
            for i in range(r):
                for j in range(i, r):
                    coeffs[k, i, j] = coeffs[k, j, i] = 1.0
                    k += 1
        if b.kind in ("skew", "hermitian"):
            unit = 1j if b.kind == "hermitian" else 1.0
            for i in range(r):
                for j in range(i + 1, r):
                    coeffs[k, i, j] = unit
                    coeffs[k, j, i] = -unit
                    k += 1
        return AffineMatrixExpr(coeffs)

    def value(self, name, x):
        return self.var(name).value(x)


def declare(spec):
    """Build a VarSpace from (name, kind, shape) triples."""
    spec = list(spec)
    if not spec:
        raise ConfigError("variable space is empty")
    space = VarSpace()
    for name, kind, shape in spec:
        space.declare(name, kind, shape)
    return space


def assemble_block(rows, symmetric=True):
    """Block matrix from a grid of expressions, arrays and None.

    With ``symmetric`` set, a None below the diagonal is filled with the
    conjugate transpose of its mirror block; every other None is a zero block
    whose size is inferred from its row and column.
    """
    nrow = len(rows)
    ncol = len(rows[0]) if nrow else 0
    if nrow == 0 or any(len(r) != ncol for r in rows):
        raise DimensionError("block grid must be a non-empty rectangle")
    if symmetric and nrow != ncol:
        raise DimensionError("symmetric assembly needs a square grid")
    nvars = 0
    for row in rows:
        for b in row:
            if isinstance(b, AffineMatrixExpr):
                nvars = b.nvars
    grid = [[None] * ncol for _ in range(nrow)]
    for i in range(nrow):
        for j in range(ncol):
            b = rows[i][j]
            if b is None and symmetric and i > j and rows[j][i] is not None:
                b = rows[j][i]
                b = b.H if isinstance(b, AffineMatrixExpr) else np.atleast_2d(np.asarray(b)).conj().T
            if b is not None and not isinstance(b, AffineMatrixExpr):
                b = AffineMatrixExpr.constant(nvars, b)
            if b is not None and b.nvars != nvars:
                raise DimensionError("block (%d, %d) lives in a different variable space" % (i, j))
            grid[i][j] = b
    heights = [None] * nrow
    widths = [None] * ncol
    for i in range(nrow):
        for j in range(ncol):
            b = grid[i][j]
            if b is None:
                continue
            h, w = b.shape
            if heights[i] not in (None, h) or widths[j] not in (None, w):
                raise DimensionError("inconsistent block size at (%d, %d): %s" % (i, j, b.shape))
            heights[i], widths[j] = h, w
    if symmetric:
        for k in range(nrow):
            heights[k] = heights[k] if heights[k] is not None else widths[k]
            widths[k] = widths[k] if widths[k] is not None else heights[k]
            if heights[k] != widths[k]:
                raise DimensionError("diagonal block %d is not square" % k)
    if None in heights or None in widths:
        raise DimensionError("cannot infer the size of an all-empty block row or column")
    dtype = np.result_type(float, *[b.coeffs for row in grid for b in row if b is not None])
    row_stacks = []
    for i in range(nrow):
        parts = []
        for j in range(ncol):
            b = grid[i][j]
            parts.append(np.zeros((nvars + 1, heights[i], widths[j]), dtype=dtype)
                         if b is None else b.coeffs)
        row_stacks.append(np.concatenate(parts, axis=2))
    return AffineMatrixExpr(np.concatenate(row_stacks, axis=1))


def hermitian_to_real(h):
    """Real embedding [[Re H, -Im H], [Im H, Re H]] of a Hermitian expression.

    H is positive definite iff the embedding is; each eigenvalue of H appears
    twice in the embedding.
    """
    if not isinstance(h, AffineMatrixExpr):
        h = AffineMatrixExpr.constant(0, np.asarray(h, dtype=complex))
    if h.shape[0] != h.shape[1] or not h.is_symmetric():
        raise DimensionError("hermitian_to_real() needs a Hermitian expression")
    re, im = h.coeffs.real, h.coeffs.imag
    top = np.concatenate([re, -im], axis=2)
    bottom = np.concatenate([im, re], axis=2)
    return AffineMatrixExpr(np.concatenate([top, bottom], axis=1))


Constraint = namedtuple("Constraint", ["name", "expr", "sense", "margin"])


class LmiProblem(object):
    """Constraints F_k(x) < 0 (negdef) or F_k(x) > 0 (posdef) over a VarSpace.

    Strictness is realized by a margin: negdef means F(x) <= -margin I and
    posdef means F(x) >= margin I.
    """

    def __init__(self, variables, name="lmi"):
        self.variables = variables
        self.name = name
        self.constraints = []
        self.tags = {}

    @property
    def nvars(self):
        return self.variables.size

    def add(self, expr, sense, margin=DEFAULT_MARGIN, name=None):
        if not isinstance(expr, AffineMatrixExpr):
            expr = AffineMatrixExpr.constant(self.nvars, expr)
        if expr.nvars != self.nvars:
            raise DimensionError("constraint has %d scalars, problem has %d" % (expr.nvars, self.nvars))
        if expr.is_complex:
            if np.any(expr.coeffs.imag != 0):
                raise DimensionError("complex constraint: embed it with hermitian_to_real() first")
            expr = expr.real
        if not expr.is_symmetric():
            raise DimensionError("constraint %r is not symmetric" % (name or len(self.constraints)))
        if sense not in (NEGDEF, POSDEF):
            raise ConfigError("unknown constraint sense %r" % sense)
        if margin < 0:
            raise ConfigError("constraint margin must be non-negative")
        name = name or "c%d" % len(self.constraints)
        self.constraints.append(Constraint(name, expr, sense, float(margin)))
        logger.debug("%s: constraint %s %s of size %d", self.name, name, sense, expr.shape[0])
        return self

    def add_lower_bound(self, expr, margin=DEFAULT_MARGIN, name=None):
        """Scalar (1x1) expression > margin."""
        if expr.shape != (1, 1):
            raise DimensionError("lower bounds apply to scalar expressions")
        return self.add(expr, POSDEF, margin, name)

    def recheck(self, x):
        return recheck(self, x)

    def dump_sdpa(self, stream):
        """Write the epigraph problem in SDPA sparse format.

        Decision scalars are x_1..x_N followed by t; the objective is t and
        block k reads t I - s_k (F_k(x) + s_k margin_k I) >= 0 with s_k = +1
        for negdef and -1 for posdef constraints.
        """
        n = self.nvars
        stream.write('"%s: minimize t subject to t I - s_k F_k(x) >= 0"\n' % self.name)
        stream.write("%d\n%d\n" % (n + 1, len(self.constraints)))
        stream.write(" ".join(str(c.expr.shape[0]) for c in self.constraints) + "\n")
        stream.write(" ".join(["0"] * n + ["1"]) + "\n")
        for blk, c in enumerate(self.constraints, 1):
            s = 1.0 if c.sense == NEGDEF else -1.0
            d = c.expr.shape[0]
            mats = [s * (c.expr.F0 + s * c.margin * np.eye(d))]
            mats += [-s * c.expr.coeffs[i + 1] for i in range(n)]
            mats.append(np.eye(d))
            for k, mat in enumerate(mats):
                rows, cols = np.nonzero(np.triu(mat))
                for i, j in zip(rows, cols):
                    stream.write("%d %d %d %d %.17g\n" % (k, blk, i + 1, j + 1, mat[i, j]))

    def __str__(self):
        sizes = ", ".join("%s:%s(%d)" % (c.name, c.sense, c.expr.shape[0]) for c in self.constraints)
        return "%s [%d scalars] %s" % (self.name, self.nvars, sizes)


def recheck(problem, x):
    """Smallest sign-adjusted eigenvalue of every constraint at ``x``.

    Positive entries mean the constraint holds strictly.
    """
    margins = []
    for c in problem.constraints:
        val = c.expr.value(x)
        val = (val + val.T) / 2.0
        margins.append(-max_eig(val) if c.sense == NEGDEF else min_eig(val))
    return np.array(margins)
