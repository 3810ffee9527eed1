import itertools
import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mck import linalg
from mck.permutohedron import (
    OrderedPartition, PartitionError, OrderBoundError, ZeroCochain,
    composition_signature, coarsenings, enumerate_partitions, face_of,
    face_vertices, face_poset_dot, hyperface_refinements,
    induced_face_automorphism, partition_of_values, refinements, refines,
    refines_eq,
)


def ordered_bell(n):
    """Independent oracle: a(n) = sum_k C(n,k) a(n-k)."""
    a = [1]
    for m in range(1, n + 1):
        a.append(sum(math.comb(m, k) * a[m - k] for k in range(1, m + 1)))
    return a[n]


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------

def test_q1_single_partition():
    parts = enumerate_partitions(1)
    assert len(parts) == 1
    assert parts[0].key() == ((1,),)


def test_q2_count_and_contents():
    parts = enumerate_partitions(2)
    keys = [J.key() for J in parts]
    assert len(parts) == 3
    assert set(keys) == {((1, 2),), ((1,), (2,)), ((2,), (1,))}


def test_q3_count_matches_brute_force():
    # brute force: all surjections {1..3} -> {1..s} via raw product
    count = 0
    for a in itertools.product(range(1, 4), repeat=3):
        s = max(a)
        if set(a) == set(range(1, s + 1)):
            count += 1
    assert count == 13
    assert len(enumerate_partitions(3)) == 13


@pytest.mark.parametrize("q", range(1, 7))
def test_counts_match_ordered_bell(q):
    assert len(enumerate_partitions(q)) == ordered_bell(q)


def test_enumeration_deterministic_and_duplicate_free():
    parts = enumerate_partitions(4)
    keys = [J.key() for J in parts]
    assert len(set(keys)) == len(keys)
    assert keys == [J.key() for J in enumerate_partitions(4)]
    # lexicographic on the assignment tuple
    assignments = [J.assignment() for J in parts]
    assert assignments == sorted(assignments)


def test_bounds_error():
    with pytest.raises(OrderBoundError):
        enumerate_partitions(0)
    with pytest.raises(OrderBoundError):
        enumerate_partitions(9)


def test_partition_validation():
    with pytest.raises(PartitionError):
        OrderedPartition.of([{1}, {1, 2}])
    with pytest.raises(PartitionError):
        OrderedPartition.of([{1}, set()], q=1)
    with pytest.raises(PartitionError):
        OrderedPartition.of([{1, 3}], q=2)


# ---------------------------------------------------------------------------
# faces
# ---------------------------------------------------------------------------

def test_face_of_top_q3_is_hexagon():
    J = OrderedPartition.of([{1, 2, 3}])
    face = face_of(J)
    assert face.dim == 2
    assert len(face.vertices) == 6  # q! vertices


def test_face_of_vertex_q2():
    J = OrderedPartition.of([{1}, {2}])
    face = face_of(J)
    assert face.dim == 0
    assert len(face.vertices) == 1


def test_face_of_q4_square():
    # permutations with first two values {1,3}: oracle by direct filter
    J = OrderedPartition.of([{1, 3}, {2, 4}])
    expected = [pi for pi in itertools.permutations((1, 2, 3, 4))
                if set(pi[:2]) == {1, 3}]
    face = face_of(J)
    assert face.dim == 2
    assert len(face.vertices) == 4
    assert sorted(face.vertices) == sorted(expected)


@pytest.mark.parametrize("q", [2, 3, 4])
def test_face_dim_is_affine_rank(q):
    for J in enumerate_partitions(q):
        face = face_of(J)
        assert face.dim == q - J.s
        assert linalg.affine_rank([list(map(Fraction, c)) for c in face.coords]) \
            == face.dim


def test_vertex_coordinates_exact_and_doubled():
    face = face_of(OrderedPartition.of([{1, 2, 3}]))
    offsets = {2 * k - 4 for k in range(1, 4)}  # 2k - (q+1) with q = 3
    for coords in face.coords:
        assert all(isinstance(c, int) for c in coords)
        assert set(coords) == offsets
        assert sum(coords) == 0  # hyperplane orthogonal to (1, .., 1)


def test_total_face_count_is_partition_count():
    for q in (2, 3, 4):
        faces = {face_of(J).vertex_set() for J in enumerate_partitions(q)}
        assert len(faces) == len(enumerate_partitions(q))


# ---------------------------------------------------------------------------
# refinement
# ---------------------------------------------------------------------------

def test_refines_examples():
    a = OrderedPartition.of([{1}, {2}])
    b = OrderedPartition.of([{1, 2}])
    c = OrderedPartition.of([{2}, {1}])
    assert refines(a, b)
    assert refines(c, b)
    assert not refines(c, a)
    assert not refines(a, c)
    assert refines_eq(a, a)
    with pytest.raises(PartitionError):
        refines(a, OrderedPartition.of([{1}, {2}, {3}]))


def test_refines_matches_geometric_containment_q5():
    rng = random.Random(20240)
    parts = enumerate_partitions(5)
    for _ in range(150):
        J1, J2 = rng.choice(parts), rng.choice(parts)
        geometric = frozenset(face_vertices(J1)) <= frozenset(face_vertices(J2))
        assert refines_eq(J1, J2) == geometric


def test_refinements_and_coarsenings_are_inverse_relations():
    for J in enumerate_partitions(3):
        for J1 in refinements(J):
            assert refines_eq(J1, J)
        for J2 in coarsenings(J):
            assert refines_eq(J, J2)
    # hyperfaces drop the dimension by exactly one
    for J in enumerate_partitions(4):
        for H in hyperface_refinements(J):
            assert H.s == J.s + 1 and refines(H, J)


# ---------------------------------------------------------------------------
# composition signatures (face-poset injectivity above a fixed face)
# ---------------------------------------------------------------------------

def test_signature_examples():
    assert composition_signature(OrderedPartition.of([{1, 3}, {2}])) == (2, 1)
    assert composition_signature(OrderedPartition.of([{2}, {1, 3}])) == (1, 2)


@pytest.mark.parametrize("q", range(1, 7))
def test_signature_injective_above_every_face(q):
    for Jhat in enumerate_partitions(q):
        seen = {}
        for J in coarsenings(Jhat):
            sig = composition_signature(J)
            assert sig not in seen, (Jhat, J, seen[sig])
            seen[sig] = J


# ---------------------------------------------------------------------------
# evaluating 0-cochains
# ---------------------------------------------------------------------------

def test_partition_of_values_example():
    c = ZeroCochain.of({1: Fraction(3, 10), 2: Fraction(1, 10), 3: Fraction(3, 10)})
    J, s = partition_of_values(c)
    assert J.key() == ((2,), (1, 3))
    assert s == 2


def test_partition_of_values_constant():
    J, s = partition_of_values({1: 1, 2: 1, 3: 1, 4: 1})
    assert s == 1 and J.key() == ((1, 2, 3, 4),)


@given(st.lists(st.fractions(min_value=-5, max_value=5), min_size=1, max_size=6),
       st.randoms(use_true_random=False))
@settings(max_examples=150, deadline=None)
def test_small_perturbations_only_refine(values, rng):
    c = ZeroCochain.of(values)
    J, s = partition_of_values(c)
    distinct = sorted(set(c.values))
    gap = min((b - a for a, b in zip(distinct, distinct[1:])), default=Fraction(1))
    eps = gap / 2
    perturbed = [v + Fraction(rng.randint(-999, 999), 2000) * eps
                 for v in c.values]
    J1, _ = partition_of_values(ZeroCochain.of(perturbed))
    assert refines_eq(J1, J)


def test_every_refinement_is_realized():
    c = ZeroCochain.of({1: Fraction(0), 2: Fraction(0), 3: Fraction(1)})
    J, _ = partition_of_values(c)
    for Jhat in refinements(J):
        realized = realize_refinement(c, J, Jhat)
        J2, _ = partition_of_values(realized)
        assert J2.key() == Jhat.key()


def realize_refinement(c, J, Jhat, eps=None):
    """Exact rational perturbation of c whose value partition is Jhat <= J."""
    distinct = sorted(set(c.values))
    gap = min((b - a for a, b in zip(distinct, distinct[1:])), default=Fraction(1))
    if eps is None:
        eps = gap / 2
    sub_rank = {}
    i = 0
    for b in J.blocks:
        rank = 0
        acc = set()
        while acc != set(b):
            for x in Jhat.blocks[i]:
                sub_rank[x] = rank
            acc |= Jhat.blocks[i]
            rank += 1
            i += 1
    q = c.q
    return ZeroCochain.of([c.values[x - 1] + eps * Fraction(sub_rank[x], q + 1)
                           for x in range(1, q + 1)])


# ---------------------------------------------------------------------------
# induced automorphisms
# ---------------------------------------------------------------------------

def test_identity_is_trivially_admissible():
    J = OrderedPartition.of([{1, 2}, {3}])
    image, rep = induced_face_automorphism({1: 1, 2: 2, 3: 3}, J)
    assert image.key() == J.key()
    assert rep.trivial and rep.admissible


def test_swap_on_segment_is_admissible():
    J = OrderedPartition.of([{1, 2}])
    image, rep = induced_face_automorphism({1: 2, 2: 1}, J)
    assert image.key() == J.key()
    assert rep.admissible and not rep.trivial and not rep.has_fixed_vertex
    # the two vertices of the segment are swapped
    verts = face_vertices(J)
    assert {tuple({1: 2, 2: 1}[x] for x in pi) for pi in verts} == set(verts)


def test_non_stabilizing_permutation_reports_image():
    J = OrderedPartition.of([{1}, {2}])
    image, rep = induced_face_automorphism({1: 2, 2: 1}, J)
    assert image.key() == ((2,), (1,))
    assert not rep.stabilizes and not rep.admissible


@pytest.mark.parametrize("q", [3, 4, 5])
def test_stabilizing_permutations_always_admissible(q):
    rng = random.Random(q * 101)
    parts = enumerate_partitions(q)
    checked = 0
    for J in parts:
        for _ in range(4):
            perm = {}
            for b in J.blocks:
                items = sorted(b)
                shuffled = items[:]
                rng.shuffle(shuffled)
                perm.update(dict(zip(items, shuffled)))
            _, rep = induced_face_automorphism(perm, J)
            assert rep.stabilizes and rep.admissible
            checked += 1
    assert checked > 0


# ---------------------------------------------------------------------------
# DOT export
# ---------------------------------------------------------------------------

def test_face_poset_dot_shape():
    dot = face_poset_dot(2)
    assert dot.startswith("digraph face_poset")
    assert dot.count("->") == 2  # two vertices under the segment
    assert '(1,2)' in dot and '(1|2)' in dot and '(2|1)' in dot
