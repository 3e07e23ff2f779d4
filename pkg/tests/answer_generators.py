"""Seeded generators for canonical answers and equivalent surface rewrites.

Used by the grader property suites and the acceptance criteria. Every
variant rendering produced here is an algebraically identical rewrite of
its source (re-ordering, re-association, power expansion, coefficient
factoring), so parsing any of them must give the same canonical form.
"""
from __future__ import annotations

import random
from fractions import Fraction

from leanrag.grader import CanonicalAnswer, boolean, polynomial, rational, render

VARIABLES = ("x", "y", "j")


def random_fraction(rng: random.Random, max_abs: int = 10**6) -> Fraction:
    numerator = rng.randint(-max_abs, max_abs)
    denominator = rng.randint(1, max_abs)
    return Fraction(numerator, denominator)


def terminating_fraction(rng: random.Random) -> Fraction:
    """A rational whose decimal expansion terminates (denominator 2^a * 5^b)."""
    numerator = rng.randint(-10**6, 10**6)
    denominator = 2 ** rng.randint(0, 6) * 5 ** rng.randint(0, 6)
    return Fraction(numerator, denominator)


def decimal_string(value: Fraction) -> str:
    """Exact decimal rendering of a terminating rational."""
    denominator = value.denominator
    twos = fives = 0
    while denominator % 2 == 0:
        denominator //= 2
        twos += 1
    while denominator % 5 == 0:
        denominator //= 5
        fives += 1
    assert denominator == 1, "fraction does not terminate"
    digits = max(twos, fives)
    scaled = value * 10**digits
    assert scaled.denominator == 1
    magnitude = abs(int(scaled))
    sign = "-" if value < 0 else ""
    if digits == 0:
        return f"{sign}{magnitude}"
    text = str(magnitude).rjust(digits + 1, "0")
    return f"{sign}{text[:-digits]}.{text[-digits:]}"


def rational_surface_forms(value: Fraction, rng: random.Random) -> list[str]:
    """Distinct surface spellings that all parse to the same rational."""
    forms = [str(value)]
    if value.denominator != 1:
        forms.append(f"({value.numerator})/({value.denominator})")
        forms.append(f"{-value.numerator}/(-{value.denominator})")
    is_terminating = _is_terminating(value)
    if is_terminating:
        decimal = decimal_string(value)
        forms.append(decimal)
        if decimal.startswith("0."):
            forms.append(decimal[1:])  # ".5" spelling
        elif decimal.startswith("-0."):
            forms.append("-" + decimal[2:])
    # Scale by a random integer: (k*num)/(k*den) reduces back.
    k = rng.randint(2, 9)
    forms.append(f"{k * value.numerator}/{k * value.denominator}")
    return forms


def _is_terminating(value: Fraction) -> bool:
    denominator = value.denominator
    for p in (2, 5):
        while denominator % p == 0:
            denominator //= p
    return denominator == 1


def random_polynomial(rng: random.Random) -> CanonicalAnswer:
    """A canonical polynomial over <=3 variables with degree <=4."""
    variables = rng.sample(VARIABLES, rng.randint(1, 3))
    mapping: dict[tuple[tuple[str, int], ...], Fraction] = {}
    for _ in range(rng.randint(1, 5)):
        exponents = {}
        for var in variables:
            exp = rng.randint(0, 4)
            if exp:
                exponents[var] = exp
        monomial = tuple(sorted(exponents.items()))
        coefficient = Fraction(rng.randint(-50, 50), rng.randint(1, 10))
        if coefficient:
            mapping[monomial] = mapping.get(monomial, Fraction(0)) + coefficient
    answer = polynomial(mapping)
    if answer.kind != "polynomial":
        # Degenerate draw collapsed to a constant; force one variable term.
        mapping[(("x", 1),)] = Fraction(rng.randint(1, 50))
        answer = polynomial(mapping)
    return answer


def _term_text(monomial, coefficient: Fraction, rng: random.Random) -> str:
    """One monomial term with randomized but equivalent spelling."""
    factors: list[str] = []
    for var, exp in monomial:
        style = rng.randrange(3)
        if exp == 1 or style == 0:
            factors.append(f"{var}**{exp}" if exp > 1 else var)
        elif style == 1:
            factors.append("*".join([var] * exp))  # full expansion
        else:
            split = rng.randint(1, exp - 1) if exp > 1 else 1
            left = f"{var}**{split}" if split > 1 else var
            right = f"{var}**{exp - split}" if exp - split > 1 else var
            factors.append(f"{left}*{right}")
    coeff_style = rng.randrange(3)
    numerator, denominator = coefficient.numerator, coefficient.denominator
    if coeff_style == 0 or not factors:
        coeff_text = str(coefficient) if (coefficient != 1 or not factors) else ""
    elif coeff_style == 1:
        k = rng.randint(2, 7)
        coeff_text = f"{k * numerator}/{k * denominator}" if denominator > 1 else f"({numerator})"
    else:
        coeff_text = f"({numerator})/({denominator})" if denominator > 1 else str(numerator)
    pieces = ([coeff_text] if coeff_text else []) + factors
    text = "*".join(pieces)
    if denominator > 1 and rng.random() < 0.5 and factors:
        # Move the denominator to a trailing constant division.
        pieces = ([str(numerator)] if numerator != 1 or not factors else []) + factors
        text = "*".join(pieces) + f"/{denominator}"
    return text


def polynomial_variants(answer: CanonicalAnswer, rng: random.Random, count: int = 3) -> list[str]:
    """Equivalent rewrites: shuffled, re-associated, expanded renderings."""
    terms = list(answer.value)
    variants = [render(answer)]
    for _ in range(count):
        order = terms[:]
        rng.shuffle(order)
        rendered_terms = [_term_text(m, c, rng) for m, c in order]
        if rng.random() < 0.5 and len(rendered_terms) >= 2:
            # Re-associate a random prefix with parentheses.
            cut = rng.randint(1, len(rendered_terms) - 1)
            head = " + ".join(rendered_terms[:cut])
            tail = " + ".join(rendered_terms[cut:])
            variants.append(f"({head}) + {tail}")
        else:
            variants.append(" + ".join(rendered_terms))
    return variants


def random_canonical(rng: random.Random, allow_tuple: bool = True) -> CanonicalAnswer:
    """Any canonical answer, for idempotence and equivalence-law checks."""
    kind = rng.randrange(4 if allow_tuple else 3)
    if kind == 0:
        return rational(random_fraction(rng, 10**4))
    if kind == 1:
        return random_polynomial(rng)
    if kind == 2:
        return boolean(rng.random() < 0.5)
    from leanrag.grader import answer_tuple

    return answer_tuple([random_canonical(rng, allow_tuple=False) for _ in range(rng.randint(2, 4))])
