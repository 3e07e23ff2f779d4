"""Golden grading cases: question, truth, each mode's reply, expected status."""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class GoldenCase:
    name: str
    ground_truth: str
    generation: str
    expected_status: str


GOLDEN_GRADING_CASES = [
    GoldenCase(
        name="linear-equation-nl",
        ground_truth="18",
        generation="The final answer is {1}.",
        expected_status="incorrect",
    ),
    GoldenCase(
        name="linear-equation-fl",
        ground_truth="18",
        generation="The final answer is {18}.",
        expected_status="correct",
    ),
    GoldenCase(
        name="base10-subtraction-nl",
        ground_truth="839075",
        generation="The final answer is {-839075}.",
        expected_status="incorrect",
    ),
    GoldenCase(
        name="base10-subtraction-fl",
        ground_truth="839075",
        generation="Therefore, the final answer is {839075}.",
        expected_status="correct",
    ),
    GoldenCase(
        name="decimal-difference-nl",
        ground_truth="72369.24",
        generation="The final answer is {72369.24}.",
        expected_status="correct",
    ),
    GoldenCase(
        name="decimal-difference-fl",
        ground_truth="72369.24",
        generation=(
            "It seems like you might have entered a statement instead of a math "
            "problem. Could you please provide the math problem you would like me "
            "to solve?"
        ),
        expected_status="no_answer",
    ),
    GoldenCase(
        name="second-derivative-nl",
        ground_truth="$20980174*j$",
        generation="The final answer is $\\{2 \\cdot 10490087 \\cdot j\\}$.",
        expected_status="correct",
    ),
    GoldenCase(
        name="second-derivative-fl",
        ground_truth="$20980174*j$",
        generation="The final answer is $\\{20980174 * j\\}$.",
        expected_status="correct",
    ),
    GoldenCase(
        name="gcd-nl",
        ground_truth="15",
        generation="Thus, the final answer is {15}.",
        expected_status="correct",
    ),
    GoldenCase(
        name="gcd-fl",
        ground_truth="15",
        generation="The final answer is {3}.",
        expected_status="incorrect",
    ),
]
