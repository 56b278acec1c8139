"""
Symbolic nonlinearities.

A small grammar (numbers, declared variables, `+ - * / ^`, unary minus,
sin/cos/exp/log and the constant `pi`) parsed into an immutable tree, with
exact symbolic differentiation and vectorised numpy evaluation.

Example:

        phi = parse('xi^2 + sin(2*pi*eta)', TRANSPORT_VARIABLES)
        phi.differentiate('xi')           # 2 * xi
        phi.eval({'t': 0.0, 'eta': 0.25, 'xi': 3.0})
"""
import math
from dataclasses import dataclass
from functools import singledispatch
from typing import Any, Literal, Mapping, Optional, Sequence, Union

import numpy as np

from .exceptions import (DomainError, ExpressionError, ExpressionSyntaxError,
                         UndeclaredVariableError)

TRANSPORT_VARIABLES = ('t', 'eta', 'xi')
IMPLICIT_VARIABLES = ('s', 't', 'xi1', 'xi2')
HOLO_VARIABLES = ('eta', 'xi')
LINE_VARIABLES = ('s',)

FunctionName = Literal['sin', 'cos', 'exp', 'log']
FUNCTIONS: tuple[FunctionName, ...] = ('sin', 'cos', 'exp', 'log')

Number = Union[float, np.ndarray]


class Node:
    """Base class of the expression tree."""
    precedence = 5


@dataclass(frozen=True)
class Const(Node):
    value: float


@dataclass(frozen=True)
class Var(Node):
    name: str


@dataclass(frozen=True)
class Neg(Node):
    arg: Node
    precedence = 3


@dataclass(frozen=True)
class Add(Node):
    left: Node
    right: Node
    precedence = 1
    symbol = '+'


@dataclass(frozen=True)
class Sub(Node):
    left: Node
    right: Node
    precedence = 1
    symbol = '-'


@dataclass(frozen=True)
class Mul(Node):
    left: Node
    right: Node
    precedence = 2
    symbol = '*'


@dataclass(frozen=True)
class Div(Node):
    """Quotient; the denominator may vanish and is checked at evaluation."""
    left: Node
    right: Node
    precedence = 2
    symbol = '/'


@dataclass(frozen=True)
class Pow(Node):
    base: Node
    exponent: int
    precedence = 4


@dataclass(frozen=True)
class Func(Node):
    name: FunctionName
    arg: Node


BinaryNode = Union[Add, Sub, Mul, Div]

ZERO = Const(0.0)
ONE = Const(1.0)


# smart constructors: constant folding and 0/1 identities only

def _const(node: Node) -> Optional[float]:
    return node.value if isinstance(node, Const) else None


def neg(a: Node) -> Node:
    if (c := _const(a)) is not None:
        return Const(-c)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def add(a: Node, b: Node) -> Node:
    ca, cb = _const(a), _const(b)
    if ca is not None and cb is not None:
        return Const(ca + cb)
    if ca == 0.0:
        return b
    if cb == 0.0:
        return a
    return Add(a, b)


def sub(a: Node, b: Node) -> Node:
    ca, cb = _const(a), _const(b)
    if ca is not None and cb is not None:
        return Const(ca - cb)
    if cb == 0.0:
        return a
    if ca == 0.0:
        return neg(b)
    return Sub(a, b)


def mul(a: Node, b: Node) -> Node:
    ca, cb = _const(a), _const(b)
    if ca is not None and cb is not None:
        return Const(ca * cb)
    if ca == 0.0 or cb == 0.0:
        return ZERO
    if ca == 1.0:
        return b
    if cb == 1.0:
        return a
    if ca == -1.0:
        return neg(b)
    if cb == -1.0:
        return neg(a)
    return Mul(a, b)


def div(a: Node, b: Node) -> Node:
    ca, cb = _const(a), _const(b)
    if ca is not None and cb is not None and cb != 0.0:
        return Const(ca / cb)
    if cb == 1.0:
        return a
    return Div(a, b)


def power(base: Node, exponent: int) -> Node:
    if exponent == 0:
        return ONE
    if exponent == 1:
        return base
    if (c := _const(base)) is not None and (c != 0.0 or exponent > 0):
        return Const(c ** exponent)
    return Pow(base, exponent)


def func(name: FunctionName, arg: Node) -> Node:
    if (c := _const(arg)) is not None and (name != 'log' or c > 0.0):
        return Const(float(getattr(np, name)(c)))
    return Func(name, arg)


# evaluation

def _domain_error(message: str, node: Node, mask: np.ndarray, index: int) -> DomainError:
    return DomainError(message, node=render(node), index=index, mask=mask)


@singledispatch
def _evaluate(node: Node, env: Mapping[str, Number]) -> Number:
    raise NotImplementedError(f'Cannot evaluate a {type(node).__name__}')


@_evaluate.register
def _(node: Const, env: Mapping[str, Number]) -> Number:
    return np.float64(node.value)


@_evaluate.register
def _(node: Var, env: Mapping[str, Number]) -> Number:
    try:
        return np.asarray(env[node.name], dtype=float)
    except KeyError:
        raise ExpressionError(f"Variable '{node.name}' is not bound.")


@_evaluate.register
def _(node: Neg, env: Mapping[str, Number]) -> Number:
    return -_evaluate(node.arg, env)


@_evaluate.register(Add)
@_evaluate.register(Sub)
@_evaluate.register(Mul)
def _(node: BinaryNode, env: Mapping[str, Number]) -> Number:
    left, right = _evaluate(node.left, env), _evaluate(node.right, env)
    with np.errstate(all='ignore'):
        if isinstance(node, Add):
            value = left + right
        elif isinstance(node, Sub):
            value = left - right
        else:
            value = left * right
    _finite(node, value, left, right)
    return value


@_evaluate.register
def _(node: Div, env: Mapping[str, Number]) -> Number:
    left, right = _evaluate(node.left, env), _evaluate(node.right, env)
    if np.any(zero := (right == 0.0)):
        raise _domain_error('Division by zero.', node, np.asarray(zero), _first(zero))
    with np.errstate(all='ignore'):
        value = left / right
    _finite(node, value, left, right)
    return value


@_evaluate.register
def _(node: Pow, env: Mapping[str, Number]) -> Number:
    base = _evaluate(node.base, env)
    if node.exponent < 0 and np.any(zero := (base == 0.0)):
        raise _domain_error('Zero raised to a negative power.', node, np.asarray(zero), _first(zero))
    with np.errstate(all='ignore'):
        value = base ** node.exponent
    _finite(node, value, base)
    return value


@_evaluate.register
def _(node: Func, env: Mapping[str, Number]) -> Number:
    arg = _evaluate(node.arg, env)
    if node.name == 'log' and np.any(bad := (arg <= 0.0)):
        raise _domain_error('Logarithm of a non-positive number.', node, np.asarray(bad), _first(bad))
    with np.errstate(all='ignore'):
        value = getattr(np, node.name)(arg)
    _finite(node, value, arg)
    return value


def _first(mask: Any) -> int:
    mask = np.asarray(mask)
    return int(np.argmax(mask)) if mask.ndim else 0


def _finite(node: Node, value: Number, *operands: Number):
    if np.all(np.isfinite(value)):
        return
    # only blame this node when its operands were finite
    bad = ~np.isfinite(value)
    for operand in operands:
        bad = bad & np.isfinite(operand)
    if np.any(bad):
        raise _domain_error('Non-finite value.', node, np.asarray(bad), _first(bad))


# differentiation

@singledispatch
def _derive(node: Node, v: str) -> Node:
    raise NotImplementedError(f'Cannot differentiate a {type(node).__name__}')


@_derive.register
def _(node: Const, v: str) -> Node:
    return ZERO


@_derive.register
def _(node: Var, v: str) -> Node:
    return ONE if node.name == v else ZERO


@_derive.register
def _(node: Neg, v: str) -> Node:
    return neg(_derive(node.arg, v))


@_derive.register
def _(node: Add, v: str) -> Node:
    return add(_derive(node.left, v), _derive(node.right, v))


@_derive.register
def _(node: Sub, v: str) -> Node:
    return sub(_derive(node.left, v), _derive(node.right, v))


@_derive.register
def _(node: Mul, v: str) -> Node:
    return add(mul(_derive(node.left, v), node.right), mul(node.left, _derive(node.right, v)))


@_derive.register
def _(node: Div, v: str) -> Node:
    da, db = _derive(node.left, v), _derive(node.right, v)
    return sub(div(da, node.right), div(mul(node.left, db), power(node.right, 2)))


@_derive.register
def _(node: Pow, v: str) -> Node:
    return mul(mul(Const(float(node.exponent)), power(node.base, node.exponent - 1)), _derive(node.base, v))


@_derive.register
def _(node: Func, v: str) -> Node:
    da = _derive(node.arg, v)
    if node.name == 'sin':
        return mul(func('cos', node.arg), da)
    if node.name == 'cos':
        return neg(mul(func('sin', node.arg), da))
    if node.name == 'exp':
        return mul(node, da)
    return div(da, node.arg)


# printing

def _number(value: float) -> str:
    text = repr(float(value))
    return f'({text})' if value < 0 or text.startswith('-') else text


@singledispatch
def render(node: Node) -> str:
    """Print a node in the parser's grammar."""
    raise NotImplementedError(f'Cannot print a {type(node).__name__}')


@render.register
def _(node: Const) -> str:
    return _number(node.value)


@render.register
def _(node: Var) -> str:
    return node.name


@render.register
def _(node: Neg) -> str:
    inner = render(node.arg)
    return f'-({inner})' if node.arg.precedence < Neg.precedence else f'-{inner}'


@render.register(Add)
@render.register(Sub)
@render.register(Mul)
@render.register(Div)
def _(node: BinaryNode) -> str:
    left = render(node.left)
    if node.left.precedence < node.precedence:
        left = f'({left})'
    right = render(node.right)
    if node.right.precedence <= node.precedence and not isinstance(node.right, Neg):
        right = f'({right})'
    return f'{left} {node.symbol} {right}'


@render.register
def _(node: Pow) -> str:
    base = render(node.base)
    if node.base.precedence < 5:
        base = f'({base})'
    exponent = f'({node.exponent})' if node.exponent < 0 else str(node.exponent)
    return f'{base}^{exponent}'


@render.register
def _(node: Func) -> str:
    return f'{node.name}({render(node.arg)})'


class Expression:
    """An immutable parsed nonlinearity over a declared variable list.

    Expressions combine with numbers and with each other through `+ - * /`,
    which is how perturbations like `phi + eps * psi` are formed.
    """

    def __init__(self, node: Node, variables: Sequence[str]):
        self.node = node
        self.variables = tuple(variables)
        self._derivatives: dict[str, 'Expression'] = {}

    @classmethod
    def constant(cls, value: float, variables: Sequence[str]) -> 'Expression':
        return cls(Const(float(value)), variables)

    def eval(self, env: Mapping[str, Any]) -> Number:
        """Evaluate at scalars (returns a float) or broadcastable arrays."""
        value = _evaluate(self.node, env)
        if np.ndim(value) == 0:
            return float(value)
        return value

    def __call__(self, **env: Any) -> Number:
        return self.eval(env)

    def differentiate(self, v: str) -> 'Expression':
        if v not in self.variables:
            raise UndeclaredVariableError(v)
        if (cached := self._derivatives.get(v)) is None:
            cached = self._derivatives[v] = Expression(_derive(self.node, v), self.variables)
        return cached

    @property
    def is_zero(self) -> bool:
        return self.node == ZERO

    @property
    def free_variables(self) -> set[str]:
        names: set[str] = set()
        stack = [self.node]
        while stack:
            node = stack.pop()
            if isinstance(node, Var):
                names.add(node.name)
            for child in ('arg', 'left', 'right', 'base'):
                if isinstance(sub_node := getattr(node, child, None), Node):
                    stack.append(sub_node)
        return names

    def _coerce(self, other: Union['Expression', float, int]) -> tuple[Node, tuple[str, ...]]:
        if isinstance(other, Expression):
            return other.node, tuple(dict.fromkeys(self.variables + other.variables))
        return Const(float(other)), self.variables

    def __add__(self, other: Union['Expression', float, int]) -> 'Expression':
        node, variables = self._coerce(other)
        return Expression(add(self.node, node), variables)

    def __radd__(self, other: Union[float, int]) -> 'Expression':
        return Expression(add(Const(float(other)), self.node), self.variables)

    def __sub__(self, other: Union['Expression', float, int]) -> 'Expression':
        node, variables = self._coerce(other)
        return Expression(sub(self.node, node), variables)

    def __rsub__(self, other: Union[float, int]) -> 'Expression':
        return Expression(sub(Const(float(other)), self.node), self.variables)

    def __mul__(self, other: Union['Expression', float, int]) -> 'Expression':
        node, variables = self._coerce(other)
        return Expression(mul(self.node, node), variables)

    def __rmul__(self, other: Union[float, int]) -> 'Expression':
        return Expression(mul(Const(float(other)), self.node), self.variables)

    def __truediv__(self, other: Union['Expression', float, int]) -> 'Expression':
        node, variables = self._coerce(other)
        return Expression(div(self.node, node), variables)

    def __neg__(self) -> 'Expression':
        return Expression(neg(self.node), self.variables)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Expression) and self.node == other.node

    def __hash__(self) -> int:
        return hash(self.node)

    def __str__(self) -> str:
        return render(self.node)

    def __repr__(self) -> str:
        return f'Expression({str(self)!r}, {self.variables!r})'


# parsing

_OPERATORS = '+-*/^()'


class _Token:
    __slots__ = ('kind', 'text', 'position')

    def __init__(self, kind: Literal['number', 'name', 'op', 'end'], text: str, position: int):
        self.kind = kind
        self.text = text
        self.position = position


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i, n = 0, len(text)
    while i < n:
        char = text[i]
        if char.isspace():
            i += 1
        elif char.isdigit() or char == '.':
            start = i
            while i < n and (text[i].isdigit() or text[i] == '.'):
                i += 1
            if i < n and text[i] in 'eE':
                j = i + 1
                if j < n and text[j] in '+-':
                    j += 1
                if j < n and text[j].isdigit():
                    i = j
                    while i < n and text[i].isdigit():
                        i += 1
            literal = text[start:i]
            if literal.count('.') > 1 or literal == '.':
                raise ExpressionSyntaxError('Malformed number', start)
            tokens.append(_Token('number', literal, start))
        elif char.isalpha() or char == '_':
            start = i
            while i < n and (text[i].isalnum() or text[i] == '_'):
                i += 1
            tokens.append(_Token('name', text[start:i], start))
        elif char == '*' and text.startswith('**', i):
            tokens.append(_Token('op', '^', i))
            i += 2
        elif char in _OPERATORS or char == '−':
            tokens.append(_Token('op', '-' if char == '−' else char, i))
            i += 1
        else:
            raise ExpressionSyntaxError(f'Unexpected character {char!r}', i)
    tokens.append(_Token('end', '', n))
    return tokens


class _Parser:
    """Recursive descent over the grammar

        expr  := term (('+' | '-') term)*
        term  := unary (('*' | '/') unary)*
        unary := '-' unary | power
        power := atom ('^' integer)?
        atom  := number | 'pi' | variable | function '(' expr ')' | '(' expr ')'
    """

    def __init__(self, text: str, variables: Sequence[str]):
        self.tokens = _tokenize(text)
        self.index = 0
        self.variables = tuple(variables)

    @property
    def current(self) -> _Token:
        return self.tokens[self.index]

    def advance(self) -> _Token:
        token = self.tokens[self.index]
        self.index += 1
        return token

    def accept(self, op: str) -> bool:
        if self.current.kind == 'op' and self.current.text == op:
            self.index += 1
            return True
        return False

    def expect(self, op: str):
        if not self.accept(op):
            raise ExpressionSyntaxError(f"Expected '{op}'", self.current.position)

    def parse(self) -> Node:
        node = self.expr()
        if self.current.kind != 'end':
            raise ExpressionSyntaxError(f'Unexpected {self.current.text!r}', self.current.position)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.current.kind == 'op' and self.current.text in '+-':
            op = self.advance().text
            right = self.term()
            node = Add(node, right) if op == '+' else Sub(node, right)
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.current.kind == 'op' and self.current.text in '*/':
            op = self.advance().text
            right = self.unary()
            node = Mul(node, right) if op == '*' else Div(node, right)
        return node

    def unary(self) -> Node:
        if self.accept('-'):
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.accept('^'):
            return Pow(base, self.integer())
        return base

    def integer(self) -> int:
        parenthesized = self.accept('(')
        sign = -1 if self.accept('-') else 1
        token = self.current
        if token.kind != 'number' or not token.text.isdigit():
            raise ExpressionSyntaxError('Expected an integer exponent', token.position)
        self.advance()
        if parenthesized:
            self.expect(')')
        return sign * int(token.text)

    def atom(self) -> Node:
        token = self.current
        if token.kind == 'number':
            self.advance()
            return Const(float(token.text))
        if token.kind == 'name':
            self.advance()
            if self.current.kind == 'op' and self.current.text == '(':
                if token.text not in FUNCTIONS:
                    raise ExpressionSyntaxError(f'Unknown function {token.text!r}', token.position)
                self.advance()
                arg = self.expr()
                self.expect(')')
                return Func(token.text, arg)  # type: ignore
            if token.text in self.variables:
                return Var(token.text)
            if token.text == 'pi':
                return Const(math.pi)
            raise UndeclaredVariableError(token.text, token.position)
        if self.accept('('):
            node = self.expr()
            self.expect(')')
            return node
        what = 'end of input' if token.kind == 'end' else repr(token.text)
        raise ExpressionSyntaxError(f'Unexpected {what}', token.position)


def parse(text: str, variables: Sequence[str]) -> Expression:
    """Parse `text` over the declared `variables`.

    Raises `ExpressionSyntaxError` with the 0-based position of the offending
    token, or `UndeclaredVariableError`.
    """
    if not text or not text.strip():
        raise ExpressionSyntaxError('Empty expression', 0)
    return Expression(_Parser(text, variables).parse(), variables)


def differentiate(e: Expression, v: str) -> Expression:
    return e.differentiate(v)


def evaluate(e: Expression, env: Mapping[str, Any]) -> Number:
    return e.eval(env)
