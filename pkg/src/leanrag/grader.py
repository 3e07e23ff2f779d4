"""Final-answer extraction, canonical math-answer parsing, and grading.

Answers canonicalize to one of four kinds: reduced rationals, expanded
polynomials with rational coefficients, booleans, and ordered tuples of
those. Equivalence is exact equality of canonical forms, so 0.5 ≡ 1/2 and
2*10490087*j ≡ 20980174*j without any floating tolerance.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .domain import Verdict

RATIONAL = "rational"
POLYNOMIAL = "polynomial"
BOOLEAN = "boolean"
TUPLE = "tuple"

# A monomial is a var→exponent map frozen as a sorted tuple; () is constant.
Monomial = tuple[tuple[str, int], ...]
PolyValue = dict[Monomial, Fraction]

_CONST: Monomial = ()


class ParseError(ValueError):
    """The answer text does not conform to the answer grammar."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class DivisionByVariable(ParseError):
    """Division is only defined by nonzero rational constants."""


class DivisionByZero(ParseError):
    """The divisor canonicalized to zero."""


class GroundTruthUnparsable(ValueError):
    """A benchmark ground-truth answer failed to parse — a data defect."""

    def __init__(self, ground_truth: str, cause: ParseError):
        super().__init__(f"ground truth {ground_truth!r} failed to parse: {cause}")
        self.ground_truth = ground_truth
        self.cause = cause


@dataclass(frozen=True)
class CanonicalAnswer:
    """Normalized answer; kind-specific payload lives in `value`.

    rational: Fraction in lowest terms, positive denominator.
    polynomial: sorted tuple of (monomial, coefficient); no zero
        coefficients, never constant (constants demote to rational).
    boolean: bool. tuple: tuple of CanonicalAnswer.
    """

    kind: str
    value: object

    def __post_init__(self) -> None:
        if self.kind not in (RATIONAL, POLYNOMIAL, BOOLEAN, TUPLE):
            raise ValueError(f"unknown canonical kind {self.kind!r}")


def rational(value: Fraction | int | str) -> CanonicalAnswer:
    return CanonicalAnswer(RATIONAL, Fraction(value))


def boolean(value: bool) -> CanonicalAnswer:
    return CanonicalAnswer(BOOLEAN, bool(value))


def polynomial(mapping: PolyValue) -> CanonicalAnswer:
    """Canonicalize a monomial→coefficient map; constants demote to rational."""
    cleaned = {m: c for m, c in mapping.items() if c != 0}
    if not cleaned or set(cleaned) == {_CONST}:
        return rational(cleaned.get(_CONST, Fraction(0)))
    return CanonicalAnswer(POLYNOMIAL, tuple(sorted(cleaned.items())))


def answer_tuple(items: list[CanonicalAnswer]) -> CanonicalAnswer:
    """Ordered tuple; a single element demotes to the element itself."""
    items = list(items)
    if not items:
        raise ValueError("tuple answers need at least one element")
    if len(items) == 1:
        return items[0]
    return CanonicalAnswer(TUPLE, tuple(items))


# --- extraction ---------------------------------------------------------


def extract_final_answer(generation: str) -> str | None:
    """Contents of the last balanced {...} group, or None when absent."""
    text = generation.replace("\\{", "{").replace("\\}", "}")
    depth = 0
    start = 0
    last: str | None = None
    for i, ch in enumerate(text):
        if ch == "{":
            depth += 1
            if depth == 1:
                start = i + 1
        elif ch == "}" and depth > 0:
            depth -= 1
            if depth == 0:
                last = text[start:i]
    return last.strip() if last is not None else None


# --- normalization ------------------------------------------------------

_FRAC_RE = re.compile(r"\\frac\s*\{")


_OPERATOR_SPACING_RE = re.compile(r"\s*([*/+(),.\-])\s*")


def normalize_answer_text(raw: str) -> str:
    """Flatten the LaTeX answer surface into plain grammar-parseable text."""
    text = raw.replace("$", "")
    text = _rewrite_fractions(text)
    text = text.replace("\\cdot", "*").replace("\\times", "*")
    # \left and \right are pure layout around delimiters; drop them whole.
    text = text.replace("\\left", "").replace("\\right", "")
    text = text.replace("^", "**")
    text = " ".join(text.split())
    return _OPERATOR_SPACING_RE.sub(r"\1", text)


def _rewrite_fractions(text: str) -> str:
    # Rewrites \frac{a}{b} to (a)/(b); loops so nested numerators resolve.
    while True:
        match = _FRAC_RE.search(text)
        if match is None:
            return text
        first = _balanced_group(text, match.end() - 1)
        if first is None:
            return text
        numerator, after = first
        rest = text[after:].lstrip()
        if not rest.startswith("{"):
            return text
        second = _balanced_group(text, len(text) - len(rest))
        if second is None:
            return text
        denominator, end = second
        text = f"{text[:match.start()]}({numerator})/({denominator}){text[end:]}"


def _balanced_group(text: str, open_at: int) -> tuple[str, int] | None:
    depth = 0
    for i in range(open_at, len(text)):
        if text[i] == "{":
            depth += 1
        elif text[i] == "}":
            depth -= 1
            if depth == 0:
                return text[open_at + 1 : i], i + 1
    return None


# --- parsing ------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"(?P<number>\d+\.\d+|\.\d+|\d+)|(?P<name>[A-Za-z]+)|(?P<op>\*\*|[-+*/(),])"
)


@dataclass(frozen=True)
class _Token:
    kind: str  # "number" | "name" | "op" | "end"
    text: str
    position: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = match.lastgroup or "op"
        tokens.append(_Token(kind, match.group(), pos))
        pos = match.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    """Recursive descent over: expression := term (('+'|'-') term)*;
    term := factor (('*'|'/') factor)*; factor := ('-')* atom ('**' int)?;
    atom := number | variable | '(' expression ')'."""

    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.index = 0

    def peek(self) -> _Token:
        return self.tokens[self.index]

    def advance(self) -> _Token:
        token = self.tokens[self.index]
        self.index += 1
        return token

    def expect_op(self, op: str) -> None:
        token = self.peek()
        if token.kind != "op" or token.text != op:
            raise ParseError(f"expected {op!r}, found {token.text or 'end of input'!r}", token.position)
        self.advance()

    def parse_elements(self) -> list[CanonicalAnswer]:
        elements = [self.parse_element()]
        while self.peek().kind == "op" and self.peek().text == ",":
            self.advance()
            elements.append(self.parse_element())
        token = self.peek()
        if token.kind != "end":
            raise ParseError(f"unexpected token {token.text!r}", token.position)
        return elements

    def parse_element(self) -> CanonicalAnswer:
        token = self.peek()
        if token.kind == "name" and token.text.lower() in ("true", "false"):
            following = self.tokens[self.index + 1]
            if following.kind == "end" or (following.kind == "op" and following.text == ","):
                self.advance()
                return boolean(token.text.lower() == "true")
        return polynomial(self.parse_expression())

    def parse_expression(self) -> PolyValue:
        value = self.parse_term()
        while self.peek().kind == "op" and self.peek().text in ("+", "-"):
            op = self.advance().text
            rhs = self.parse_term()
            value = _poly_add(value, rhs if op == "+" else _poly_neg(rhs))
        return value

    def parse_term(self) -> PolyValue:
        value = self.parse_factor()
        while self.peek().kind == "op" and self.peek().text in ("*", "/"):
            op = self.advance()
            rhs = self.parse_factor()
            if op.text == "*":
                value = _poly_mul(value, rhs)
            else:
                value = _poly_div(value, rhs, op.position)
        return value

    def parse_factor(self) -> PolyValue:
        negations = 0
        while self.peek().kind == "op" and self.peek().text == "-":
            self.advance()
            negations += 1
        value = self.parse_atom()
        if self.peek().kind == "op" and self.peek().text == "**":
            self.advance()
            exponent = self.peek()
            if exponent.kind != "number" or "." in exponent.text or int(exponent.text) < 1:
                raise ParseError("exponent must be a positive integer", exponent.position)
            self.advance()
            value = _poly_pow(value, int(exponent.text))
        return _poly_neg(value) if negations % 2 else value

    def parse_atom(self) -> PolyValue:
        token = self.peek()
        if token.kind == "number":
            self.advance()
            return _poly_const(Fraction(token.text))
        if token.kind == "name":
            self.advance()
            return {((token.text, 1),): Fraction(1)}
        if token.kind == "op" and token.text == "(":
            self.advance()
            value = self.parse_expression()
            self.expect_op(")")
            return value
        raise ParseError(f"expected a value, found {token.text or 'end of input'!r}", token.position)


def _poly_const(c: Fraction) -> PolyValue:
    return {_CONST: c} if c != 0 else {}


def _poly_add(a: PolyValue, b: PolyValue) -> PolyValue:
    out = dict(a)
    for monomial, coeff in b.items():
        total = out.get(monomial, Fraction(0)) + coeff
        if total == 0:
            out.pop(monomial, None)
        else:
            out[monomial] = total
    return out


def _poly_neg(a: PolyValue) -> PolyValue:
    return {m: -c for m, c in a.items()}


def _poly_mul(a: PolyValue, b: PolyValue) -> PolyValue:
    out: PolyValue = {}
    for ma, ca in a.items():
        for mb, cb in b.items():
            exponents: dict[str, int] = dict(ma)
            for var, exp in mb:
                exponents[var] = exponents.get(var, 0) + exp
            monomial = tuple(sorted(exponents.items()))
            total = out.get(monomial, Fraction(0)) + ca * cb
            if total == 0:
                out.pop(monomial, None)
            else:
                out[monomial] = total
    return out


def _poly_div(a: PolyValue, b: PolyValue, position: int) -> PolyValue:
    if any(m != _CONST for m in b):
        raise DivisionByVariable("division by a non-constant expression", position)
    divisor = b.get(_CONST, Fraction(0))
    if divisor == 0:
        raise DivisionByZero("division by zero", position)
    return {m: c / divisor for m, c in a.items()}


def _poly_pow(a: PolyValue, n: int) -> PolyValue:
    out = _poly_const(Fraction(1))
    for _ in range(n):
        out = _poly_mul(out, a)
    return out


def parse_answer(text: str) -> CanonicalAnswer:
    """Parse normalized answer text into its canonical form."""
    if not text.strip():
        raise ParseError("empty answer", 0)
    elements = _Parser(text).parse_elements()
    return elements[0] if len(elements) == 1 else answer_tuple(elements)


# --- equivalence and rendering ------------------------------------------


def equivalent(a: CanonicalAnswer, b: CanonicalAnswer, tolerance: Fraction | float | None = None) -> bool:
    """Exact canonical equality; optional absolute tolerance for rationals."""
    if tolerance is None:
        return a == b
    if a.kind != b.kind:
        return False
    if a.kind == RATIONAL:
        return abs(a.value - b.value) <= Fraction(tolerance)
    if a.kind == TUPLE:
        return len(a.value) == len(b.value) and all(
            equivalent(x, y, tolerance) for x, y in zip(a.value, b.value)
        )
    if a.kind == POLYNOMIAL:
        am, bm = dict(a.value), dict(b.value)
        return set(am) == set(bm) and all(
            abs(am[m] - bm[m]) <= Fraction(tolerance) for m in am
        )
    return a == b


def render(answer: CanonicalAnswer) -> str:
    """Canonical printer; its output re-parses to an equal CanonicalAnswer."""
    if answer.kind == RATIONAL:
        return str(answer.value)
    if answer.kind == BOOLEAN:
        return "True" if answer.value else "False"
    if answer.kind == TUPLE:
        return ", ".join(render(item) for item in answer.value)
    parts: list[str] = []
    for monomial, coeff in answer.value:
        vars_text = "*".join(
            f"{var}**{exp}" if exp > 1 else var for var, exp in monomial
        )
        if not vars_text:
            term = str(coeff)
        elif coeff == 1:
            term = vars_text
        elif coeff == -1:
            term = f"-{vars_text}"
        else:
            term = f"{coeff}*{vars_text}"
        parts.append(term)
    out = parts[0]
    for term in parts[1:]:
        out += f" - {term[1:]}" if term.startswith("-") else f" + {term}"
    return out


# --- grading ------------------------------------------------------------


def grade(
    generation: str,
    ground_truth: str,
    tolerance: Fraction | float | None = None,
) -> Verdict:
    """Extract, normalize, parse, and compare against the ground truth."""
    try:
        truth = parse_answer(normalize_answer_text(ground_truth))
    except ParseError as exc:
        raise GroundTruthUnparsable(ground_truth, exc) from exc
    extracted = extract_final_answer(generation)
    if extracted is None:
        return Verdict(status="no_answer", canonical_truth=truth)
    try:
        model = parse_answer(normalize_answer_text(extracted))
    except ParseError:
        return Verdict(status="unparsed", canonical_truth=truth, extracted=extracted)
    status = "correct" if equivalent(model, truth, tolerance) else "incorrect"
    return Verdict(
        status=status,
        canonical_truth=truth,
        extracted=extracted,
        canonical_model=model,
    )
