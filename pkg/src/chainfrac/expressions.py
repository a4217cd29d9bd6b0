"""Minimal arithmetic expressions over ``x`` (and ``w``) used in load specs.

Grammar: numbers, the variables, named constants, ``+ - * / ^`` (``**`` is
accepted too), parentheses and the functions ``sin``, ``cos``, ``exp``.
Strings are checked against this token set before sympy ever sees them.
"""

from __future__ import annotations

import re

import numpy as np
import sympy
from sympy.parsing.sympy_parser import (
    convert_xor,
    parse_expr,
    standard_transformations,
)

from .errors import DomainError

_FUNCTIONS = {"sin": sympy.sin, "cos": sympy.cos, "exp": sympy.exp}
_BUILTIN_CONSTANTS = {"pi": sympy.pi, "e": sympy.E}
_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_]\w*)|(\*\*|[-+*/^()]))")
_TRANSFORMS = standard_transformations + (convert_xor,)


def _tokens(text):
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise DomainError(f"unexpected character {text[pos]!r} in expression {text!r}")
        yield m.group(1), m.group(2), m.group(3)
        pos = m.end()


class Expression:
    """A parsed expression, callable on numpy arrays.

    >>> Expression("x - 1/2")(np.array([0.0, 1.0]))
    array([-0.5,  0.5])
    """

    def __init__(self, text, variables=("x",), constants=None):
        text = str(text).replace("×", "*").replace("−", "-").replace("·", "*")
        self.text = text
        self.variables = tuple(variables)
        self.constants = dict(constants or {})
        allowed = set(self.variables) | set(_FUNCTIONS) | set(_BUILTIN_CONSTANTS) | set(self.constants)
        depth = 0
        for number, name, op in _tokens(text):
            if name is not None and name not in allowed:
                raise DomainError(
                    f"unknown name {name!r} in expression {text!r}; allowed: {sorted(allowed)}"
                )
            if op == "(":
                depth += 1
            elif op == ")":
                depth -= 1
                if depth < 0:
                    raise DomainError(f"unbalanced parentheses in {text!r}")
        if depth != 0:
            raise DomainError(f"unbalanced parentheses in {text!r}")
        self._symbols = {v: sympy.Symbol(v, real=True) for v in self.variables}
        local = dict(_FUNCTIONS)
        local.update(_BUILTIN_CONSTANTS)
        local.update({k: sympy.Float(v) for k, v in self.constants.items()})
        local.update(self._symbols)
        try:
            self.expr = parse_expr(text, local_dict=local, global_dict={"Integer": sympy.Integer,
                                                                        "Float": sympy.Float,
                                                                        "Rational": sympy.Rational,
                                                                        "Symbol": sympy.Symbol},
                                   transformations=_TRANSFORMS, evaluate=True)
        except Exception as exc:  # sympy raises a zoo of types on bad syntax
            raise DomainError(f"cannot parse expression {text!r}: {exc}") from None
        extra = {str(s) for s in self.expr.free_symbols} - set(self.variables)
        if extra:
            raise DomainError(f"unresolved names {sorted(extra)} in {text!r}")
        self._fn = sympy.lambdify([self._symbols[v] for v in self.variables], self.expr, "numpy")

    @classmethod
    def _from_sympy(cls, expr, variables, text):
        obj = cls.__new__(cls)
        obj.text = text
        obj.variables = tuple(variables)
        obj.constants = {}
        obj._symbols = {v: sympy.Symbol(v, real=True) for v in obj.variables}
        obj.expr = expr
        obj._fn = sympy.lambdify([obj._symbols[v] for v in obj.variables], expr, "numpy")
        return obj

    def __call__(self, *args):
        arrays = [np.asarray(a, dtype=float) for a in args]
        shape = np.broadcast_shapes(*(a.shape for a in arrays))
        out = np.asarray(self._fn(*arrays), dtype=float)
        return np.broadcast_to(out, shape).copy() if out.shape != shape else out

    def diff(self, variable):
        d = sympy.diff(self.expr, self._symbols[variable])
        return Expression._from_sympy(d, self.variables, f"d/d{variable}({self.text})")

    @property
    def is_constant_in(self):
        """Set of variables the expression does not depend on."""
        used = {str(s) for s in self.expr.free_symbols}
        return {v for v in self.variables if v not in used}

    def __repr__(self):
        return f"Expression({self.text!r})"


def parse_number(value, constants=None):
    """Evaluate a numeric config entry that may be an expression in named constants."""
    if isinstance(value, bool):
        raise DomainError(f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    expr = Expression(str(value), variables=(), constants=constants)
    return float(expr())
