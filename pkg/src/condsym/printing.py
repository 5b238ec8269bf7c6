"""Deterministic plain-text printing in the session DSL.

The output re-parses (see :mod:`condsym.dsl`) to a structurally equal
expression.  Term and factor order follow sympy's lexicographic ordering,
so identical expressions always print identically.
"""
from __future__ import annotations

import sympy as sp

from .expr import OpaqueFunction

_ADD, _MUL, _NEG, _POW, _ATOM = 1, 2, 3, 4, 5

_NAMED_FUNCS = ("sin", "cos", "tan", "exp", "log", "sinh", "cosh", "tanh", "atan", "asinh", "Abs")


def to_text(e) -> str:
    return _p(sp.sympify(e))[0]


def _wrap(pair, level):
    text, prec = pair
    return f"({text})" if prec < level else text


def _p(e):
    if e.is_Integer:
        return (str(e.p), _ATOM if e >= 0 else _NEG)
    if e.is_Rational:
        text = f"{e.p}/{e.q}"
        return (text, _MUL if e > 0 else _NEG)
    if e.is_Float:
        return (repr(float(e)), _ATOM if e >= 0 else _NEG)
    if e.is_Symbol:
        return (e.name, _ATOM)
    if e is sp.pi:
        return ("pi", _ATOM)
    if e.is_Add:
        parts = []
        for i, t in enumerate(e.as_ordered_terms()):
            c, _ = t.as_coeff_Mul()
            if i and c.is_negative:
                parts.append(" - " + _wrap(_p(-t), _MUL))
            elif i:
                parts.append(" + " + _wrap(_p(t), _MUL))
            else:
                parts.append(_wrap(_p(t), _NEG))
        return ("".join(parts), _ADD)
    if e.is_Mul:
        c, rest = e.as_coeff_Mul()
        if c.is_negative:
            inner = _p(-e)
            return ("-" + _wrap(inner, _MUL), _NEG)
        num, den = [], []
        if c.p != 1:
            num.append(sp.Integer(c.p))
        if c.q != 1:
            den.append(sp.Integer(c.q))
        for f in rest.as_ordered_factors():
            if f.is_Pow and f.exp.is_Rational and f.exp.is_negative:
                den.append(f.base ** -f.exp)
            else:
                num.append(f)
        text = "*".join(_wrap(_p(f), _MUL + 0.5) for f in num) or "1"
        if den:
            dtext = "*".join(_wrap(_p(f), _MUL + 0.5) for f in den)
            text += "/" + (f"({dtext})" if len(den) > 1 else dtext)
        return (text, _MUL)
    if e.is_Pow and e.exp.is_Rational and e.exp.is_negative:
        return ("1/" + _wrap(_p(e.base ** -e.exp), _MUL + 0.5), _MUL)
    if e.is_Pow:
        base = _wrap(_p(e.base), _ATOM)
        ex = e.exp
        if ex.is_Integer and ex >= 0 or ex.is_Symbol:
            et = _p(ex)[0]
        else:
            et = f"({_p(ex)[0]})"
        return (f"{base}^{et}", _POW)
    if isinstance(e, OpaqueFunction):
        args = ", ".join(_p(a)[0] for a in e.args)
        if any(e.orders):
            return (f"d[{e.fname};{','.join(map(str, e.orders))}]({args})", _ATOM)
        return (f"{e.fname}({args})", _ATOM)
    if isinstance(e, sp.Function) and type(e).__name__ in _NAMED_FUNCS:
        args = ", ".join(_p(a)[0] for a in e.args)
        return (f"{type(e).__name__}({args})", _ATOM)
    raise ValueError(f"cannot print {e!r} in the DSL")


def op_to_text(op) -> str:
    """``c0*d/dx0 + ... + eta*d/du``; the zero operator prints as ``0``."""
    names = [f"d/d{v.name}" for v in op.space.variables] + [f"d/d{op.space.u.name}"]
    parts = []
    for c, name in zip(op.coefficients(), names):
        c = sp.sympify(c)
        if c == 0:
            continue
        neg = c.as_coeff_Mul()[0].is_negative
        mag = -c if neg else c
        term = name if mag == 1 else f"{_wrap(_p(mag), _MUL + 0.5)}*{name}"
        if parts:
            parts.append((" - " if neg else " + ") + term)
        else:
            parts.append(("-" if neg else "") + term)
    return "".join(parts) or "0"
