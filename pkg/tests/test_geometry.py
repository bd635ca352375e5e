import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from persuade.core import ResourceLimitError
from persuade.geometry import (SimplexGrid, build_grid, cell_volume,
                               composition_rank, contraction_floor,
                               lattice_vertex_count, max_cell_diameter_bound,
                               project_to_contraction,
                               project_to_contraction_batch, refine_simplex,
                               simplex_volume, _lattice_vertices, _rank_table)


# ---------------------------------------------------------------------------
# build_grid
# ---------------------------------------------------------------------------

def test_k2_delta1_grid():
    g = build_grid(2, 1.0, with_cells=True)
    assert g.denominator == 2
    np.testing.assert_allclose(g.vertices, [[0, 1], [0.5, 0.5], [1, 0]])
    assert g.cells.shape == (2, 2)
    assert g.measured_max_diameter == pytest.approx(1.0)


def test_k3_whole_simplex():
    g = build_grid(3, 2.0, with_cells=True)
    assert g.denominator == 1
    assert g.vertex_count == 3
    assert g.cells.shape == (1, 3)


def test_k3_n4_vertex_count_and_volumes():
    g = build_grid(3, 0.5, with_cells=True)
    assert g.denominator == 4
    # Oracle: direct enumeration of lattice points.
    brute = {tuple(x) for x in itertools.product(range(5), repeat=3)
             if sum(x) == 4}
    assert g.vertex_count == len(brute) == math.comb(6, 2) == 15
    got = {tuple(v) for v in (g.vertices * 4 + 0.5).astype(int)}
    assert got == brute
    # Cells tile the simplex: volumes sum to the full simplex area.
    total = sum(cell_volume(g.vertices[c]) for c in g.cells)
    assert total == pytest.approx(simplex_volume(3), rel=1e-9)
    assert g.cell_count == 16  # N^(k-1)


def test_cells_unimodular_in_rational_arithmetic():
    # Exact rational check: every cell has the same (k-1)-volume, so the
    # count alone certifies the tiling.
    g = build_grid(3, 0.5, with_cells=True)
    N = g.denominator
    base = None
    for cell in g.cells:
        verts = [[Fraction(int(round(x * N)), N) for x in row]
                 for row in g.vertices[cell]]
        e1 = [a - b for a, b in zip(verts[1], verts[0])]
        e2 = [a - b for a, b in zip(verts[2], verts[0])]
        # Gram determinant in exact arithmetic.
        g11 = sum(x * x for x in e1)
        g12 = sum(x * y for x, y in zip(e1, e2))
        g22 = sum(x * x for x in e2)
        det = g11 * g22 - g12 * g12
        assert det > 0  # affinely independent
        base = base or det
        assert det == base


def test_vertices_are_exact_lattice_multiples():
    g = build_grid(3, 0.21)
    N = g.denominator
    scaled = g.vertices * N
    np.testing.assert_array_equal(scaled, np.round(scaled))
    assert g.vertex_count == lattice_vertex_count(3, N)


def test_measured_diameter_within_requested():
    for k, delta in [(2, 0.3), (3, 0.17), (4, 0.5)]:
        g = build_grid(k, delta, with_cells=True)
        assert g.measured_max_diameter <= delta + 1e-12
        assert g.measured_max_diameter == pytest.approx(
            max_cell_diameter_bound(k, g.denominator))


def test_k4_diameter_formula_needs_larger_n():
    # Staircase cells in four states pair vertices at l1 distance 4/N, so
    # N must be ceil(4/delta) rather than ceil(2/delta).
    g = build_grid(4, 0.5, with_cells=True)
    assert g.denominator == 8
    assert g.measured_max_diameter <= 0.5 + 1e-12


def test_vertex_cap():
    with pytest.raises(ResourceLimitError):
        build_grid(3, 1e-4, vertex_cap=1000)


def test_align_multiple_rounds_up():
    g = build_grid(2, 0.3, align_multiple=12)
    assert g.denominator % 12 == 0


def test_composition_rank_matches_enumeration_order():
    for k, N in [(2, 5), (3, 4), (4, 3)]:
        verts = _lattice_vertices(k, N)
        table = _rank_table(k, N)
        ranks = composition_rank(verts, N, table)
        np.testing.assert_array_equal(ranks, np.arange(verts.shape[0]))


# ---------------------------------------------------------------------------
# point location / coverage
# ---------------------------------------------------------------------------

def test_union_coverage_random_points():
    rng = np.random.default_rng(11)
    for k, delta in [(2, 0.13), (3, 0.27)]:
        g = build_grid(k, delta)
        Q = rng.dirichlet(np.ones(k), size=10_000)
        for q in Q:
            assert g.locate_cells(q), f"uncovered point {q}"


def test_locate_at_vertices_and_edges():
    g = build_grid(3, 0.5, with_cells=True)
    # A grid vertex belongs to every incident cell.
    v = g.vertices[5]
    cells = g.locate_cells(v)
    assert len(cells) >= 2
    for cell in cells:
        assert any(np.allclose(g.vertices[i], v) for i in cell)
    # Brute-force cross-check against the explicit cell list.
    rng = np.random.default_rng(5)
    for q in rng.dirichlet(np.ones(3), size=200):
        located = {tuple(sorted(c.tolist())) for c in g.locate_cells(q)}
        brute = set()
        for cell in g.cells:
            if SimplexGrid._bary_inside(g.vertices[cell], q, 1e-9):
                brute.add(tuple(sorted(cell.tolist())))
        assert located == brute


def test_refine_simplex_diameter():
    S = np.eye(3)
    verts, cells = refine_simplex(S, 0.4)
    for cell in cells:
        pts = verts[cell]
        for i in range(3):
            assert np.abs(pts - pts[i]).sum(axis=1).max() <= 0.4 + 1e-12


# ---------------------------------------------------------------------------
# contraction projection
# ---------------------------------------------------------------------------

def test_projection_fixes_center():
    center = np.full(3, 1 / 3)
    np.testing.assert_allclose(project_to_contraction(center, 0.7), center,
                               atol=1e-15)


def test_projection_idempotent_inside():
    rng = np.random.default_rng(2)
    eps = 0.5
    lo = contraction_floor(3, eps)
    inside = rng.dirichlet(np.ones(3), size=40) * (1 - 3 * lo) + lo
    out = project_to_contraction_batch(inside, eps)
    np.testing.assert_allclose(out, inside, atol=1e-12)


def test_projection_k2_eps1_endpoint():
    # The contracted simplex is the segment [(1/4,3/4), (3/4,1/4)]; the point
    # (1,0) projects to the endpoint (3/4,1/4).  Oracle: dense minimization
    # over the segment parameter.
    out = project_to_contraction(np.array([1.0, 0.0]), 1.0)
    t = np.linspace(0, 1, 20001)[:, None]
    seg = t * np.array([0.25, 0.75]) + (1 - t) * np.array([0.75, 0.25])
    d = np.linalg.norm(seg - np.array([1.0, 0.0]), axis=1)
    oracle = seg[int(np.argmin(d))]
    np.testing.assert_allclose(out, [0.75, 0.25], atol=1e-12)
    np.testing.assert_allclose(oracle, [0.75, 0.25], atol=1e-4)


def test_projection_is_1_lipschitz_euclidean():
    rng = np.random.default_rng(3)
    for k in (2, 3, 5):
        A = rng.dirichlet(np.ones(k), size=300)
        B = rng.dirichlet(np.ones(k), size=300)
        pa = project_to_contraction_batch(A, 0.3)
        pb = project_to_contraction_batch(B, 0.3)
        lhs = np.linalg.norm(pa - pb, axis=1)
        rhs = np.linalg.norm(A - B, axis=1)
        assert np.all(lhs <= rhs + 1e-12)


def test_projection_displacement_bound():
    rng = np.random.default_rng(4)
    for k in (2, 3, 4):
        diam = math.sqrt(2.0)  # Euclidean diameter of the simplex
        for eps in (0.1, 0.5, 1.0):
            Q = rng.dirichlet(np.ones(k), size=300)
            P = project_to_contraction_batch(Q, eps)
            disp = np.linalg.norm(Q - P, axis=1)
            assert np.all(disp <= eps * eps * diam + 1e-12)


from hypothesis import given, settings
from hypothesis import strategies as st


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.floats(0.05, 1.5), st.integers(2, 5))
def test_projection_properties_hypothesis(seed, eps, k):
    rng = np.random.default_rng(seed)
    q = rng.dirichlet(np.ones(k))
    p = project_to_contraction_batch(q[None, :], eps)[0]
    lo = contraction_floor(k, eps)
    assert p.min() >= lo - 1e-12          # lands in the contracted simplex
    assert abs(p.sum() - 1.0) <= 1e-9
    p2 = project_to_contraction_batch(p[None, :], eps)[0]
    np.testing.assert_allclose(p2, p, atol=1e-9)  # idempotent
    # l1 displacement is at most twice the total raised mass, <= 2 eps^2.
    assert np.abs(q - p).sum() <= 2 * eps * eps + 1e-9
