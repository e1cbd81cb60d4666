"""Independent reference computations for the test-suite.

Everything here is exact (``fractions.Fraction``) and built from closed
forms or brute-force enumeration, never from the package's dynamic program.
"""

from fractions import Fraction
from itertools import combinations, product
from math import comb


def hyper_pmf(n, n_p, k, y):
    if y < 0 or y > k or y > n_p or k - y > n - n_p:
        return Fraction(0)
    return Fraction(comb(n_p, y) * comb(n - n_p, k - y), comb(n, k))


def hyper_cdf(n, n_p, k, y):
    return sum((hyper_pmf(n, n_p, k, t) for t in range(0, y + 1)), Fraction(0))


def hyper_sf(n, n_p, k, y):
    return sum((hyper_pmf(n, n_p, k, t) for t in range(max(y, 0), k + 1)), Fraction(0))


def binom_pmf(k, p, y):
    return comb(k, y) * p**y * (1 - p) ** (k - y)


def arrangements(n, n_p):
    """All binary rankings with ``n_p`` ones, each equally likely under the hypergeometric model."""
    for ones in combinations(range(n), n_p):
        x = [0] * n
        for i in ones:
            x[i] = 1
        yield tuple(x)


def sequences_with_prob(n, n_p, step):
    """Every full draw sequence with its path probability.

    ``step(rp, rn)`` returns the exact probability that the next draw is
    protected given ``rp`` protected and ``rn`` non-protected remaining.
    """
    for x in product((0, 1), repeat=n):
        if sum(x) != n_p:
            continue
        prob = Fraction(1)
        rp, rn = n_p, n - n_p
        for g in x:
            q = step(rp, rn)
            prob *= q if g else 1 - q
            if prob == 0:
                break
            rp -= g
            rn -= 1 - g
        if prob:
            yield x, prob


def weighted_step(omega):
    w = Fraction(omega)

    def step(rp, rn):
        return w * rp / (w * rp + rn)

    return step


def binomial_step(f):
    f = Fraction(f)

    def step(rp, rn):
        if rp == 0:
            return Fraction(0)
        if rn == 0:
            return Fraction(1)
        return f

    return step


def law_from_sequences(seqs, k):
    law = {}
    for x, prob in seqs:
        y = sum(x[:k])
        law[y] = law.get(y, Fraction(0)) + prob
    return law


def exact_z(x, n, n_p, k):
    """``min_{j<=k} P(Y_j <= y_j)`` with closed-form hypergeometric CDFs."""
    y = 0
    z = Fraction(2)
    for j in range(1, k + 1):
        y += x[j - 1]
        z = min(z, hyper_cdf(n, n_p, j, y))
    return z


def exact_z_law(n, n_p, k):
    """Exact distribution of ``Z_k`` by enumerating all arrangements."""
    total = comb(n, n_p)
    law = {}
    for x in arrangements(n, n_p):
        z = exact_z(x, n, n_p, k)
        law[z] = law.get(z, Fraction(0)) + Fraction(1, total)
    return law


def exact_score(z_obs, z_law):
    return sum((p for z, p in z_law.items() if z <= z_obs), Fraction(0))


def exact_alpha_c(z_law, alpha):
    """``sup{g <= alpha : P(Z <= g) <= alpha}`` on the exact law of ``Z``.

    Returned as the atom (or ``alpha``) that realises the supremum, matching
    the package's candidate rule.
    """
    alpha = Fraction(alpha)
    if exact_score(alpha, z_law) <= alpha:
        return alpha
    ok = [z for z in z_law if z <= alpha and exact_score(z, z_law) <= alpha]
    return max(ok) if ok else None


def prefix_sums(x):
    out, y = [], 0
    for g in x:
        y += g
        out.append(y)
    return out
