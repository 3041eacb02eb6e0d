"""Independent brute-force oracles used by the test suite.

Everything here is deliberately naive (plain loops, exact rational
arithmetic) and shares no code with the implementations it checks.
"""

from __future__ import annotations

from fractions import Fraction


def naive_hit_ratio(ranked_lists, positive_sets, n):
    """(hit pairs) / (total pairs) by rescanning each top-n prefix."""
    hits = 0
    pairs = 0
    for ranked, positives in zip(ranked_lists, positive_sets):
        for positive in positives:
            pairs += 1
            if positive in list(ranked)[:n]:
                hits += 1
    if pairs == 0:
        return None
    return hits / pairs


def naive_average_precision(ranked, positives, n):
    if not positives:
        return None
    total = 0.0
    prefix = list(ranked)[:n]
    for k in range(1, len(prefix) + 1):
        if prefix[k - 1] in positives:
            relevant_so_far = 0
            for item in prefix[:k]:
                if item in positives:
                    relevant_so_far += 1
            total += relevant_so_far / k
    return total / min(len(positives), n)


def naive_map(ranked_lists, positive_sets, n):
    values = []
    for ranked, positives in zip(ranked_lists, positive_sets):
        ap = naive_average_precision(ranked, positives, n)
        if ap is not None:
            values.append(ap)
    if not values:
        return None
    return sum(values) / len(values)


def exact_binomial_tail(n: int, p_num: int, p_den: int, k: int) -> Fraction:
    """P[X >= k] for X ~ Binomial(n, p_num/p_den), exact rational sum."""
    p = Fraction(p_num, p_den)
    total = Fraction(0)
    for j in range(max(k, 0), n + 1):
        coeff = Fraction(1)
        for i in range(j):
            coeff = coeff * (n - i) / (i + 1)
        total += coeff * p**j * (1 - p) ** (n - j)
    return total
