"""Shared random-instance and random-scheme generators for the test suite.

Everything is seeded through numpy Generators so runs are reproducible.
Constraint bounds are set relative to the no-revelation scheme, which makes
the slack (Slater margin) of every generated instance known by construction.
"""

from __future__ import annotations

import numpy as np

from persuade.core import (ConstraintSpec, MaxLinearTerm, Posterior,
                           ProblemInstance, SignalingScheme, UtilitySpec,
                           eval_constraint_batch)


def interior_prior(rng: np.random.Generator, k: int) -> Posterior:
    """A prior bounded away from the simplex boundary."""
    w = rng.dirichlet(np.ones(k)) * 0.6 + 0.4 / k
    return Posterior(w / w.sum())


def random_max_linear(rng: np.random.Generator, k: int,
                      nonneg: bool = True) -> UtilitySpec:
    n_f = int(rng.integers(1, 4))
    coeffs = rng.uniform(0.0 if nonneg else -0.5, 1.0, size=(n_f, k))
    rank = 1 if n_f == 1 else int(rng.integers(1, 3))
    return UtilitySpec.max_linear(coeffs, rank=rank)


def random_welfare_style(rng: np.random.Generator, k: int) -> UtilitySpec:
    """Mixture of maxes of nonnegative linear functionals (the shape the
    auction conversion produces; factor-2 Jensen certified)."""
    n_terms = int(rng.integers(1, 4))
    weights = rng.dirichlet(np.ones(n_terms))
    terms = [MaxLinearTerm(rng.uniform(0, 1, size=(int(rng.integers(2, 4)), k)),
                           rank=1, weight=float(w))
             for w in weights]
    return UtilitySpec.mixture(terms)


def random_constraint(rng: np.random.Generator, k: int, prior: Posterior,
                      kind: str, slack: float, mode: str = "ex_ante") -> ConstraintSpec:
    """A constraint whose no-revelation slack is exactly ``slack``."""
    if kind == "linear":
        coeffs = rng.uniform(0, 1, size=k)
        base = float(coeffs @ prior.weights)
        return ConstraintSpec.linear(coeffs, bound=base + slack, mode=mode)
    if kind == "norm_distance":
        order = [1, 2, float("inf")][int(rng.integers(0, 3))]
        return ConstraintSpec.norm_distance(order, bound=slack, mode=mode)
    if kind == "grouped_kl":
        if k >= 3 and rng.uniform() < 0.4:
            merged = sorted(rng.choice(k, size=2, replace=False).tolist())
            rest = [i for i in range(k) if i not in merged]
            partition = [tuple(merged)] + [(i,) for i in rest]
        else:
            partition = [(i,) for i in range(k)]
        refs = np.array([prior.weights[list(cell)].sum() for cell in partition])
        return ConstraintSpec.grouped_kl(partition, 1.0, refs, bound=slack,
                                         mode=mode)
    if kind == "entropy":
        base = float(np.sum(prior.weights * np.log(prior.weights)))
        return ConstraintSpec.entropy(bound=base + slack, mode=mode)
    if kind == "neg_min_weighted":
        w = rng.uniform(0.5, 1.5, size=k)
        base = -float((w * prior.weights).min())
        return ConstraintSpec.neg_min_weighted(w, bound=base + slack, mode=mode)
    raise ValueError(kind)


def random_instance(rng: np.random.Generator, k: int, m: int,
                    kinds=("linear", "norm_distance", "grouped_kl"),
                    slack_range=(0.05, 0.3)) -> tuple[ProblemInstance, float]:
    """Instance plus its certified no-revelation Slater margin."""
    prior = interior_prior(rng, k)
    utility = random_max_linear(rng, k)
    slacks = rng.uniform(*slack_range, size=m)
    cons = tuple(random_constraint(rng, k, prior,
                                   kinds[int(rng.integers(0, len(kinds)))],
                                   float(s)) for s in slacks)
    inst = ProblemInstance(k=k, prior=prior, utility=utility, constraints=cons)
    return inst, float(slacks.min()) if m else float("inf")


def random_plausible_scheme(rng: np.random.Generator, prior: Posterior,
                            n_signals: int) -> SignalingScheme:
    """Bayes-plausible scheme induced by a random signaling matrix."""
    k = prior.k
    pi = rng.dirichlet(np.ones(n_signals), size=k)  # (k, signals)
    joint = prior.weights[:, None] * pi
    sig_mass = joint.sum(axis=0)
    keep = sig_mass > 1e-12
    posts = (joint[:, keep] / sig_mass[keep]).T
    return SignalingScheme.from_points(posts, sig_mass[keep])


def feasible_conversion_case(rng: np.random.Generator, k: int, m: int,
                             kinds=("linear", "norm_distance", "grouped_kl",
                                    "neg_min_weighted", "entropy")):
    """(scheme, constraints, prior) with the scheme ex-ante feasible."""
    prior = interior_prior(rng, k)
    scheme = random_plausible_scheme(rng, prior, int(rng.integers(2, 6)))
    pts = scheme.support_matrix()
    cons = []
    for _ in range(m):
        kind = kinds[int(rng.integers(0, len(kinds)))]
        spec = random_constraint(rng, k, prior, kind, slack=0.0)
        value = float(scheme.probs @ eval_constraint_batch(spec, pts, prior))
        cons.append(spec.with_bound(value + float(rng.uniform(0.0, 0.15))))
    return scheme, tuple(cons), prior
