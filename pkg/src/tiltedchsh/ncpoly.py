"""Non-commutative polynomials in two binary observables per party.

The algebra is generated by A0, A1 (Alice) and B0, B1 (Bob) subject to

    A_x^2 = B_y^2 = I,    [A_x, B_y] = 0.

Every monomial therefore has a unique normal form: a freely reduced
Alice word followed by a freely reduced Bob word.  Coefficients are any
objects supporting ring arithmetic (``int``, ``Fraction``, ``float`` or
sympy expressions), which lets the same code serve exact and numeric
checks.
"""
from __future__ import annotations

import re
from fractions import Fraction
from numbers import Number
from typing import Dict, Iterable, Mapping, NamedTuple, Tuple

import numpy as np

PARTIES = ("A", "B")


class Letter(NamedTuple):
    party: str
    index: int

    def __str__(self):
        return f"{self.party}{self.index}"


LETTERS = tuple(Letter(p, i) for p in PARTIES for i in (0, 1))


def _reduce(seq: Iterable[int]) -> Tuple[int, ...]:
    out = []
    for s in seq:
        if out and out[-1] == s:
            out.pop()
        else:
            out.append(s)
    return tuple(out)


class Word(NamedTuple):
    """Normal-form monomial: Alice indices then Bob indices."""

    a: Tuple[int, ...] = ()
    b: Tuple[int, ...] = ()

    @classmethod
    def from_letters(cls, letters: Iterable[Letter]) -> "Word":
        a, b = [], []
        for letter in letters:
            if letter.index not in (0, 1):
                raise ValueError(f"bad letter index {letter.index}")
            if letter.party == "A":
                a.append(letter.index)
            elif letter.party == "B":
                b.append(letter.index)
            else:
                raise ValueError(f"unknown party {letter.party!r}")
        return cls(_reduce(a), _reduce(b))

    def __mul__(self, other: "Word") -> "Word":  # type: ignore[override]
        return Word(_reduce(self.a + other.a), _reduce(self.b + other.b))

    def adjoint(self) -> "Word":
        return Word(self.a[::-1], self.b[::-1])

    @property
    def degree(self) -> Tuple[int, int]:
        return len(self.a), len(self.b)

    def is_identity(self) -> bool:
        return not self.a and not self.b

    def __str__(self):
        a = "".join(f"A{i}" for i in self.a)
        b = "".join(f"B{i}" for i in self.b)
        if a and b:
            return f"{a}.{b}"
        return a or b or "I"

    @classmethod
    def parse(cls, text: str) -> "Word":
        text = text.strip()
        if text in ("", "I"):
            return cls()
        tokens = re.findall(r"([AB])([01])|(\.)", text)
        if "".join(t[0] + t[1] + t[2] for t in tokens) != text:
            raise ValueError(f"cannot parse word {text!r}")
        return cls.from_letters(Letter(p, int(i)) for p, i, dot in tokens if not dot)


IDENTITY = Word()


def _is_zero(c) -> bool:
    try:
        return bool(c == 0)
    except TypeError:
        return False


class NcPolynomial:
    """Immutable finite sum ``sum_w c_w * w`` over normal-form words."""

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[Word, object] | None = None):
        clean: Dict[Word, object] = {}
        for w, c in (terms or {}).items():
            if not isinstance(w, Word):
                raise TypeError(f"expected Word key, got {type(w).__name__}")
            if not _is_zero(c):
                clean[w] = c
        self._terms = dict(sorted(clean.items()))

    # construction helpers
    @classmethod
    def constant(cls, c) -> "NcPolynomial":
        return cls({IDENTITY: c})

    @classmethod
    def letter(cls, name: str) -> "NcPolynomial":
        return cls({Word.parse(name): 1})

    @classmethod
    def zero(cls) -> "NcPolynomial":
        return cls()

    @property
    def terms(self) -> Dict[Word, object]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def words(self):
        return list(self._terms)

    def coefficient(self, w: Word):
        return self._terms.get(w, 0)

    def is_zero(self) -> bool:
        return not self._terms

    def __len__(self):
        return len(self._terms)

    # ring operations
    @staticmethod
    def _coerce(other) -> "NcPolynomial":
        if isinstance(other, NcPolynomial):
            return other
        return NcPolynomial.constant(other)

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self._terms)
        for w, c in other._terms.items():
            out[w] = out[w] + c if w in out else c
        return NcPolynomial(out)

    __radd__ = __add__

    def __neg__(self):
        return NcPolynomial({w: -c for w, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def scale(self, s) -> "NcPolynomial":
        return NcPolynomial({w: s * c for w, c in self._terms.items()})

    def __mul__(self, other):
        if not isinstance(other, NcPolynomial):
            return self.scale(other)
        out: Dict[Word, object] = {}
        for w1, c1 in self._terms.items():
            for w2, c2 in other._terms.items():
                w = w1 * w2
                c = c1 * c2
                out[w] = out[w] + c if w in out else c
        return NcPolynomial(out)

    def __rmul__(self, other):
        return self.scale(other)

    def __truediv__(self, s):
        if isinstance(s, int):
            s = Fraction(s)
        return NcPolynomial({w: c / s for w, c in self._terms.items()})

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative powers are undefined")
        out = NcPolynomial.constant(1)
        for _ in range(n):
            out = out * self
        return out

    def adjoint(self) -> "NcPolynomial":
        out: Dict[Word, object] = {}
        for w, c in self._terms.items():
            if hasattr(c, "conjugate"):
                c = c.conjugate()
            out[w.adjoint()] = c
        return NcPolynomial(out)

    def __eq__(self, other):
        if not isinstance(other, NcPolynomial):
            if isinstance(other, Number):
                other = NcPolynomial.constant(other)
            else:
                return NotImplemented
        return (self - other).is_zero()

    def __hash__(self):
        return hash(tuple(self._terms.items()))

    def map_coefficients(self, f) -> "NcPolynomial":
        return NcPolynomial({w: f(c) for w, c in self._terms.items()})

    def max_abs_coefficient(self) -> float:
        return max((abs(complex(c)) for c in self._terms.values()), default=0.0)

    def max_degree(self) -> Tuple[int, int]:
        da = max((len(w.a) for w in self._terms), default=0)
        db = max((len(w.b) for w in self._terms), default=0)
        return da, db

    def to_text(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for w, c in self._terms.items():
            parts.append(str(c) if w.is_identity() else f"{c} * {w}")
        return " + ".join(parts)

    def __repr__(self):
        return f"NcPolynomial({self.to_text()})"

    @classmethod
    def from_text(cls, text: str) -> "NcPolynomial":
        """Parse the output of :meth:`to_text` with rational coefficients."""
        text = text.strip()
        if text == "0":
            return cls()
        out: Dict[Word, object] = {}
        for chunk in text.split(" + "):
            if " * " in chunk:
                c, w = chunk.split(" * ")
                word = Word.parse(w)
            else:
                c, word = chunk, IDENTITY
            coeff = Fraction(c)
            out[word] = out.get(word, 0) + coeff
        return cls(out)


I = NcPolynomial.constant(1)
A0 = NcPolynomial.letter("A0")
A1 = NcPolynomial.letter("A1")
B0 = NcPolynomial.letter("B0")
B1 = NcPolynomial.letter("B1")


def multiply(p: NcPolynomial, q: NcPolynomial) -> NcPolynomial:
    return p * q


def adjoint(p: NcPolynomial) -> NcPolynomial:
    return p.adjoint()


def _party_word_matrix(indices, mats, dim):
    m = np.eye(dim, dtype=complex)
    for i in indices:
        m = m @ mats[i]
    return m


def _check_assignment(assignment):
    mats = {}
    for letter in LETTERS:
        key = letter if letter in assignment else str(letter)
        if key not in assignment:
            raise ValueError(f"no matrix assigned to letter {letter}")
        m = np.asarray(assignment[key], dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"matrix for letter {letter} is not square: shape {m.shape}")
        mats[letter] = m
    for party in PARTIES:
        first = mats[Letter(party, 0)].shape[0]
        second = mats[Letter(party, 1)]
        if second.shape[0] != first:
            raise ValueError(
                f"dimension mismatch for letter {party}1: {second.shape[0]} != {first}"
            )
    return mats


def operator_matrix(p: NcPolynomial, assignment) -> np.ndarray:
    """Matrix of ``p`` with A-letters acting as ``A (x) I`` and B-letters as ``I (x) B``.

    ``assignment`` maps letters (``Letter`` or strings like ``"A0"``) to matrices.
    """
    mats = _check_assignment(assignment)
    a_mats = [mats[Letter("A", 0)], mats[Letter("A", 1)]]
    b_mats = [mats[Letter("B", 0)], mats[Letter("B", 1)]]
    da, db = a_mats[0].shape[0], b_mats[0].shape[0]
    out = np.zeros((da * db, da * db), dtype=complex)
    for w, c in p.items():
        out += complex(c) * np.kron(
            _party_word_matrix(w.a, a_mats, da), _party_word_matrix(w.b, b_mats, db)
        )
    return out


def substitute_numeric(p: NcPolynomial, assignment, state) -> complex:
    """Expectation value <psi| p(A_x (x) I, I (x) B_y) |psi>."""
    psi = np.asarray(state, dtype=complex).ravel()
    mats = _check_assignment(assignment)
    dim = mats[Letter("A", 0)].shape[0] * mats[Letter("B", 0)].shape[0]
    if psi.shape[0] != dim:
        raise ValueError(f"state has dimension {psi.shape[0]}, expected {dim}")
    val = np.vdot(psi, operator_matrix(p, mats) @ psi)
    return val.real if abs(val.imag) < 1e-12 else val
