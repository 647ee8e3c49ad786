"""Counting arithmetic for momentum-field potentials.

A momentum field with n = 3N components need not have functionally
independent components.  Writing it in terms of scalar potentials (one
gauge scalar plus m conjugate pairs) requires an odd number 2m + 1 of
independent functions, and k functional relations among the components
leave n - k of them independent.  Equating the two counts gives the
integer constraint

    n - k = 2m + 1,   0 <= k <= n - 1,   m >= 0,

whose solutions are enumerated here.  m = 0 (maximal redundancy, k = n-1)
is the irrotational case where the field is a single gradient.  Exactly
one solution family has a particle-number-independent structure: k = N-1,
m = N, for which the total number of dynamical variables 2m + 2 (pairs
plus the gauge scalar plus the density) grows by exactly 2 per particle.

Only the even/odd parity of the potential count is needed to select the
representation: an even count (pairs only, no gauge scalar) cannot cover
the single-particle case, which needs three independent functions, so the
odd representation is the only one valid for every N.

This module is deliberately non-numerical: the field itself is never
sampled, because determining the minimal potential count from sampled
data would require the rank of a matrix built from the unknown field.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = [
    "ClassSolution",
    "enumerate_class_solutions",
    "regular_solution",
    "variable_count",
    "parity_check",
]


@dataclass(frozen=True, order=True)
class ClassSolution:
    """One admissible (k, m) pair for an N-particle momentum field."""

    k: int
    m: int
    N: int

    def __post_init__(self):
        n = self.n
        if n - self.k != 2 * self.m + 1:
            raise ValueError(f"(k={self.k}, m={self.m}) violates n - k = 2m + 1 for n={n}")
        if not (0 <= self.k <= n - 1):
            raise ValueError(f"k={self.k} outside [0, {n - 1}]")
        if self.m < 0:
            raise ValueError(f"m must be non-negative, got {self.m}")

    @property
    def n(self) -> int:
        return 3 * self.N

    @property
    def potential_count(self) -> int:
        """Independent scalar functions needed for the field: 2m + 1."""
        return 2 * self.m + 1

    @property
    def regular(self) -> bool:
        return self.k == self.N - 1 and self.m == self.N

    @property
    def maximal_redundancy(self) -> bool:
        return self.m == 0 and self.k == self.n - 1


def enumerate_class_solutions(N: int, include_maximal: bool = False) -> list[ClassSolution]:
    """All integer pairs (k, m) with 3N - k = 2m + 1, sorted by k.

    The m = 0 gradient-only solution is excluded unless include_maximal
    is set.
    """
    if N < 1:
        raise ValueError(f"particle count must be >= 1, got {N}")
    n = 3 * N
    m_min = 0 if include_maximal else 1
    out = []
    for k in range(0, n):
        m2 = n - k - 1
        if m2 % 2 == 0 and m2 // 2 >= m_min:
            out.append(ClassSolution(k=k, m=m2 // 2, N=N))
    return out


def regular_solution(N: int) -> ClassSolution:
    """The unique pair with constant per-particle growth: (k, m) = (N-1, N)."""
    sol = ClassSolution(k=N - 1, m=N, N=N)
    assert sol in enumerate_class_solutions(N, include_maximal=True)
    return sol


def variable_count(sol: ClassSolution) -> int:
    """Dynamical variables carried by the solution: 2m potentials in pairs,
    the gauge scalar, and the density, i.e. 2m + 2."""
    return 2 * sol.m + 2


def parity_check(N: int) -> tuple[str, str]:
    """Representation parity valid for every particle number.

    Returns ("odd", reason).  The even (pairs-only) expansion provides an
    even number of functions and cannot describe N = 1, which needs three
    independent ones; since the structure may not depend on N, the odd
    expansion is selected for all N.
    """
    if N < 1:
        raise ValueError(f"particle count must be >= 1, got {N}")
    reason = (
        "even representation supplies 2m functions and fails at N = 1, "
        "which requires three; the structure must not depend on N"
    )
    return "odd", reason
