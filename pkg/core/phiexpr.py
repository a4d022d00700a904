"""Textual nonlinearity phi(x, u): parsing, evaluation, Lipschitz estimate.

Grammar (components separated by ';')::

    phi     := expr (';' expr)*
    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | primary
    primary := NUMBER | VAR | FUNC '(' expr ')' | '(' expr ')'
    VAR     := 'x' INDEX | 'u' INDEX          (1-based)
    FUNC    := 'sin' | 'cos' | 'tanh' | 'abs'

Evaluation is vectorized: ``x`` may carry leading batch dimensions, with the
state (or input) index on the last axis.
"""

import logging
import re

import numpy as np

from core.errors import ConfigError
from core.errors import DomainError
from core.errors import ExprSyntaxError
from utils.seeder import make_rng

logger = logging.getLogger(__name__)

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "tanh": np.tanh,
    "abs": np.abs,
}

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/();])
""", re.VERBOSE)


class Node(object):

    def evaluate(self, x, u):
        raise NotImplementedError

    def is_zero(self):
        return False


class Const(Node):

    def __init__(self, value):
        self.value = float(value)

    def evaluate(self, x, u):
        return self.value

    def is_zero(self):
        return self.value == 0.0

    def __str__(self):
        text = repr(self.value)
        return "(%s)" % text if self.value < 0 else text


class Var(Node):

    def __init__(self, kind, index):
        self.kind = kind  # "x" or "u"
        self.index = index  # 0-based

    def evaluate(self, x, u):
        src = x if self.kind == "x" else u
        return src[..., self.index]

    def __str__(self):
        return "%s%d" % (self.kind, self.index + 1)


class Unary(Node):

    def __init__(self, op, child):
        self.op = op  # "neg" or a FUNCTIONS key
        self.child = child

    def evaluate(self, x, u):
        val = self.child.evaluate(x, u)
        if self.op == "neg":
            return -val
        return FUNCTIONS[self.op](val)

    def __str__(self):
        if self.op == "neg":
            return "(-%s)" % self.child
        return "%s(%s)" % (self.op, self.child)


class Binary(Node):

    def __init__(self, op, left, right):
        self.op = op
        self.left = left
        self.right = right

    def evaluate(self, x, u):
        a = self.left.evaluate(x, u)
        b = self.right.evaluate(x, u)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if np.any(np.asarray(b) == 0.0):
            raise DomainError("division by zero in '%s'" % self)
        return a / b

    def __str__(self):
        return "(%s %s %s)" % (self.left, self.op, self.right)


def _tokenize(src):
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise ExprSyntaxError("unexpected character %r" % src[pos], pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(kind), pos))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser(object):
    """Recursive-descent parser over the token list."""

    def __init__(self, src, n_states, n_inputs):
        self.tokens = _tokenize(src)
        self.i = 0
        self.n_states = n_states
        self.n_inputs = n_inputs

    @property
    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.advance()
        if text != value or kind == "end":
            found = "end of input" if kind == "end" else repr(text)
            raise ExprSyntaxError("expected %r, found %s" % (value, found), pos)

    def parse_components(self):
        components = [self.parse_expr()]
        while self.peek[1] == ";":
            self.advance()
            components.append(self.parse_expr())
        kind, text, pos = self.peek
        if kind != "end":
            raise ExprSyntaxError("unexpected %r" % text, pos)
        return components

    def parse_expr(self):
        node = self.parse_term()
        while self.peek[0] == "op" and self.peek[1] in "+-":
            op = self.advance()[1]
            node = Binary(op, node, self.parse_term())
        return node

    def parse_term(self):
        node = self.parse_unary()
        while self.peek[0] == "op" and self.peek[1] in "*/":
            op = self.advance()[1]
            node = Binary(op, node, self.parse_unary())
        return node

    def parse_unary(self):
        if self.peek[0] == "op" and self.peek[1] == "-":
            self.advance()
            return Unary("neg", self.parse_unary())
        if self.peek[0] == "op" and self.peek[1] == "+":
            self.advance()
            return self.parse_unary()
        return self.parse_primary()

    def parse_primary(self):
        kind, text, pos = self.advance()
        if kind == "num":
            return Const(float(text))
        if kind == "ident":
            if text in FUNCTIONS:
                self.expect("(")
                child = self.parse_expr()
                self.expect(")")
                return Unary(text, child)
            return self._variable(text, pos)
        if kind == "op" and text == "(":
            node = self.parse_expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError("expected an operand, found %s" % found, pos)

    def _variable(self, text, pos):
        m = re.fullmatch(r"([xu])([1-9][0-9]*)", text)
        if m is None:
            raise ExprSyntaxError("unknown identifier %r" % text, pos)
        kind, index = m.group(1), int(m.group(2))
        limit = self.n_states if kind == "x" else self.n_inputs
        if index > limit:
            raise ExprSyntaxError(
                "unknown identifier %r (only %d %s variables declared)"
                % (text, limit, "state" if kind == "x" else "input"), pos)
        return Var(kind, index - 1)


class PhiFunction(object):
    """Vector nonlinearity with one expression tree per state component."""

    def __init__(self, components, n_states, n_inputs):
        if len(components) != n_states:
            raise ConfigError("phi has %d components, expected %d"
                              % (len(components), n_states))
        self.components = tuple(components)
        self.n_states = n_states
        self.n_inputs = n_inputs

    @classmethod
    def zero(cls, n_states, n_inputs):
        return cls([Const(0.0)] * n_states, n_states, n_inputs)

    def is_zero(self):
        return all(c.is_zero() for c in self.components)

    def eval(self, x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        if x.shape[-1:] != (self.n_states,):
            raise ConfigError("x has length %s, expected %d"
                              % (x.shape[-1:], self.n_states))
        if u.shape[-1:] != (self.n_inputs,):
            raise ConfigError("u has length %s, expected %d"
                              % (u.shape[-1:], self.n_inputs))
        batch = np.broadcast_shapes(x.shape[:-1], u.shape[:-1])
        out = np.empty(batch + (self.n_states,))
        for i, comp in enumerate(self.components):
            out[..., i] = comp.evaluate(x, u)
        return out

    __call__ = eval

    def __str__(self):
        return "; ".join(str(c) for c in self.components)


def parse(src, n_states, n_inputs):
    components = _Parser(src, n_states, n_inputs).parse_components()
    phi = PhiFunction(components, n_states, n_inputs)
    logger.debug("parsed phi: %s", phi)
    return phi


def estimate_lipschitz(phi, box, samples, seed):
    """Sampled Lipschitz constant of phi in x with a shared input u.

    ``box`` lists (low, high) intervals for x1..xn followed by u1..um. Pairs
    (x1, x2) and u are drawn uniformly in the box from stream 0 of ``seed``;
    the first k pairs do not depend on ``samples``.
    """
    n, m = phi.n_states, phi.n_inputs
    box = np.asarray(box, dtype=float)
    if box.shape != (n + m, 2):
        raise ConfigError("box needs %d (low, high) intervals, got shape %s"
                          % (n + m, box.shape))
    if np.any(box[:, 0] > box[:, 1]):
        raise ConfigError("box has an empty interval")
    if samples < 2:
        raise ConfigError("samples must be at least 2")
    low = np.concatenate([box[:n, 0], box[:n, 0], box[n:, 0]])
    width = np.concatenate([box[:n, 1], box[:n, 1], box[n:, 1]]) - low
    draws = low + width * make_rng(seed, 0).random((samples, 2 * n + m))
    x1, x2, u = draws[:, :n], draws[:, n:2 * n], draws[:, 2 * n:]
    dist = np.linalg.norm(x1 - x2, axis=1)
    keep = dist > 0.0
    if not np.any(keep):
        return 0.0
    diff = np.linalg.norm(phi.eval(x1[keep], u[keep]) - phi.eval(x2[keep], u[keep]), axis=1)
    return float(np.max(diff / dist[keep]))
