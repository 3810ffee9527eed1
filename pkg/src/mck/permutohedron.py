"""Ordered set partitions and exact permutohedron face geometry.

Conventions
-----------
The ground set is {1..q}.  An ordered partition J = (J_1, ..., J_s) indexes a
face of the order-q permutohedron: the face's vertices are the points
P_pi = sum_k (k - (q+1)/2) e_{pi_k} over permutations pi whose first |J_1|
values form the set J_1, the next |J_2| values the set J_2, and so on.  In
coordinates, axis j of P_pi holds pi^{-1}(j) - (q+1)/2.

All vertex coordinates are stored doubled (2*pi^{-1}(j) - q - 1) so they stay
integers; nothing in this module touches floating point.

Refinement order: J' < J means J' splits blocks of J into ordered runs of
consecutive sub-blocks, equivalently the face of J' is contained in the face
of J.
"""

import itertools
from dataclasses import dataclass
from fractions import Fraction

MAX_ORDER = 8  # desk-scale guard for enumeration


class PartitionError(ValueError):
    """Invalid ordered-partition argument."""


class OrderBoundError(ValueError):
    """Permutohedron order outside the supported range."""


# ---------------------------------------------------------------------------
# Ordered partitions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OrderedPartition:
    """Ordered partition of {1..q} into nonempty blocks (order significant)."""

    blocks: tuple  # tuple of frozenset[int]
    q: int

    def __post_init__(self):
        seen = set()
        for b in self.blocks:
            if not b:
                raise PartitionError("empty block")
            if seen & b:
                raise PartitionError("blocks not disjoint")
            seen |= b
        if seen != set(range(1, self.q + 1)):
            raise PartitionError("blocks do not partition the ground set {1..%d}" % self.q)

    @classmethod
    def of(cls, blocks, q=None):
        blocks = tuple(frozenset(b) for b in blocks)
        if q is None:
            q = sum(len(b) for b in blocks)
        return cls(blocks, q)

    @property
    def s(self):
        return len(self.blocks)

    def level_of(self, label):
        """1-based block index of a label."""
        for k, b in enumerate(self.blocks):
            if label in b:
                return k + 1
        raise PartitionError("label %r not in ground set" % (label,))

    def assignment(self):
        """The level-assignment tuple (J(1), ..., J(q)), 1-based."""
        lev = {}
        for k, b in enumerate(self.blocks):
            for x in b:
                lev[x] = k + 1
        return tuple(lev[i] for i in range(1, self.q + 1))

    def key(self):
        """Canonical hashable form: tuple of sorted tuples."""
        return tuple(tuple(sorted(b)) for b in self.blocks)

    def relabel(self, sigma):
        """Apply the label permutation sigma (dict or callable) blockwise."""
        f = sigma if callable(sigma) else sigma.__getitem__
        return OrderedPartition.of([frozenset(f(x) for x in b) for b in self.blocks], self.q)

    def __str__(self):
        return "(" + "|".join(",".join(map(str, sorted(b))) for b in self.blocks) + ")"


def enumerate_partitions(q):
    """All ordered set partitions of {1..q}.

    Deterministic order: lexicographic on the level-assignment tuple
    (J(1), ..., J(q)).  The count is the ordered Bell number.
    """
    if not isinstance(q, int) or q < 1 or q > MAX_ORDER:
        raise OrderBoundError("q must be an integer in 1..%d, got %r" % (MAX_ORDER, q))
    out = []

    def extend(prefix, used_max):
        pos = len(prefix)
        if pos == q:
            out.append(prefix)
            return
        # value v may exceed used_max, but the final image must be {1..s}:
        # after choosing v, the missing values below max(used_max, v) must
        # still fit in the remaining positions.
        for v in range(1, q + 1):
            new_max = max(used_max, v)
            missing = len([w for w in range(1, new_max + 1) if w != v and w not in prefix])
            if missing <= q - pos - 1:
                extend(prefix + (v,), new_max)

    extend((), 0)
    parts = []
    for a in out:
        s = max(a)
        blocks = [frozenset(i + 1 for i, v in enumerate(a) if v == k) for k in range(1, s + 1)]
        parts.append(OrderedPartition.of(blocks, q))
    return parts


def composition_signature(J):
    """Block sizes (|J_1|, ..., |J_s|) in block order."""
    return tuple(len(b) for b in J.blocks)


def refines(J1, J2):
    """Strict refinement: J1 obtained from J2 by splitting blocks into
    ordered runs of consecutive sub-blocks (J1 != J2)."""
    return J1.key() != J2.key() and refines_eq(J1, J2)


def refines_eq(J1, J2):
    """Reflexive refinement (J1 <= J2)."""
    if J1.q != J2.q:
        raise PartitionError("mismatched ground sets")
    i = 0
    for b in J2.blocks:
        acc = set()
        while acc != set(b):
            if i >= len(J1.blocks) or not J1.blocks[i] <= b:
                return False
            acc |= J1.blocks[i]
            i += 1
    return i == len(J1.blocks)


def coarsenings(J):
    """All J' with J <= J' (merging runs of consecutive blocks), incl. J."""
    s = J.s
    out = []
    # choose cut positions among the s-1 gaps
    for cuts in itertools.product((False, True), repeat=s - 1):
        blocks = []
        cur = set(J.blocks[0])
        for i, cut in enumerate(cuts):
            if cut:
                blocks.append(frozenset(cur))
                cur = set(J.blocks[i + 1])
            else:
                cur |= J.blocks[i + 1]
        blocks.append(frozenset(cur))
        out.append(OrderedPartition.of(blocks, J.q))
    return out


def _ordered_partitions_of_set(labels):
    """All ordered partitions of a plain set of labels (any ground set)."""
    labels = sorted(labels)
    n = len(labels)
    out = []

    def extend(prefix, used_max):
        pos = len(prefix)
        if pos == n:
            s = max(prefix)
            out.append(tuple(frozenset(labels[i] for i, v in enumerate(prefix) if v == k)
                             for k in range(1, s + 1)))
            return
        for v in range(1, n + 1):
            new_max = max(used_max, v)
            missing = len([w for w in range(1, new_max + 1) if w != v and w not in prefix])
            if missing <= n - pos - 1:
                extend(prefix + (v,), new_max)

    extend((), 0)
    return out


def refinements(J, proper=False):
    """All J' <= J (splitting each block into an ordered partition of itself).

    With proper=True, J itself is excluded.  Deterministic order.
    """
    per_block = [_ordered_partitions_of_set(b) for b in J.blocks]
    out = []
    for combo in itertools.product(*per_block):
        blocks = tuple(itertools.chain.from_iterable(combo))
        J1 = OrderedPartition.of(blocks, J.q)
        if proper and J1.key() == J.key():
            continue
        out.append(J1)
    return out


def hyperface_refinements(J):
    """Refinements obtained by splitting exactly one block into two."""
    out = []
    for k, b in enumerate(J.blocks):
        if len(b) < 2:
            continue
        members = sorted(b)
        # nonempty proper subsets as the lower sub-block
        for r in range(1, len(members)):
            for lower in itertools.combinations(members, r):
                blocks = (J.blocks[:k]
                          + (frozenset(lower), b - frozenset(lower))
                          + J.blocks[k + 1:])
                out.append(OrderedPartition.of(blocks, J.q))
    return out


# ---------------------------------------------------------------------------
# Faces and exact geometry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PermFace:
    """A face of the permutohedron of order q.

    `vertices` are the generating permutations pi (1-based value tuples);
    `coords` the matching vertex coordinate vectors, doubled to stay integral:
    coordinate j of vertex pi is 2*pi^{-1}(j) - q - 1.
    """

    partition: OrderedPartition
    dim: int
    vertices: tuple
    coords: tuple

    def vertex_set(self):
        return frozenset(self.vertices)


def _doubled_coords(pi):
    q = len(pi)
    inv = [0] * (q + 1)
    for pos, val in enumerate(pi, start=1):
        inv[val] = pos
    return tuple(2 * inv[j] - q - 1 for j in range(1, q + 1))


def face_vertices(J):
    """Vertex permutations of the face of J, sorted."""
    pools = [itertools.permutations(sorted(b)) for b in J.blocks]
    verts = []
    for combo in itertools.product(*pools):
        verts.append(tuple(itertools.chain.from_iterable(combo)))
    return tuple(sorted(verts))


def face_of(J):
    """The permutohedron face indexed by the ordered partition J."""
    verts = face_vertices(J)
    return PermFace(partition=J, dim=J.q - J.s, vertices=verts,
                    coords=tuple(_doubled_coords(pi) for pi in verts))


def face_contains(J_small, J_big):
    """Exact geometric containment of faces via vertex sets."""
    vs = frozenset(face_vertices(J_small))
    vb = frozenset(face_vertices(J_big))
    return vs <= vb


# ---------------------------------------------------------------------------
# Evaluating 0-cochains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ZeroCochain:
    """Exact rational saddle values c_1..c_q, indexed by label."""

    values: tuple  # tuple of Fraction, position i holds c_{i+1}

    @classmethod
    def of(cls, values):
        if isinstance(values, dict):
            q = len(values)
            if set(values) != set(range(1, q + 1)):
                raise PartitionError("values must be defined on exactly {1..q}")
            return cls(tuple(Fraction(values[i]) for i in range(1, q + 1)))
        return cls(tuple(Fraction(v) for v in values))

    @property
    def q(self):
        return len(self.values)


def partition_of_values(cochain):
    """Group labels by equal value, blocks ordered by increasing value.

    Returns (J, s) where s is the number of distinct values.
    """
    if isinstance(cochain, dict):
        cochain = ZeroCochain.of(cochain)
    by_value = {}
    for label, v in enumerate(cochain.values, start=1):
        by_value.setdefault(v, set()).add(label)
    blocks = [frozenset(by_value[v]) for v in sorted(by_value)]
    J = OrderedPartition.of(blocks, cochain.q)
    return J, len(blocks)


# ---------------------------------------------------------------------------
# Induced automorphisms and admissibility
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FaceAutReport:
    """Admissibility of the face map induced by a label permutation."""

    image: OrderedPartition
    stabilizes: bool       # sigma maps the face to itself
    trivial: bool          # fixes the face pointwise
    has_fixed_vertex: bool
    subfaces_ok: bool      # each subface maps to itself or to a disjoint face
    admissible: bool


def induced_face_automorphism(sigma, J):
    """Image of the face of J under the axis permutation sigma, plus an
    admissibility report for the induced self-map when sigma stabilizes it.

    sigma maps the vertex pi to sigma o pi.  Admissible means: trivial, or
    fixed-vertex-free with every subface mapping onto itself or onto a face
    disjoint from it.
    """
    f = sigma if callable(sigma) else sigma.__getitem__
    image = J.relabel(f)
    if image.key() != J.key():
        return image, FaceAutReport(image, False, False, False, False, False)
    verts = face_vertices(J)
    vset = frozenset(verts)
    moved = {pi: tuple(f(x) for x in pi) for pi in verts}
    assert frozenset(moved.values()) == vset
    trivial = all(moved[pi] == pi for pi in verts)
    fixed = any(moved[pi] == pi for pi in verts)
    subfaces_ok = True
    if not trivial:
        for sub in refinements(J):
            sub_img = sub.relabel(f)
            if sub_img.key() == sub.key():
                continue
            a = frozenset(face_vertices(sub))
            b = frozenset(face_vertices(sub_img))
            if a & b:
                subfaces_ok = False
                break
    admissible = trivial or (not fixed and subfaces_ok)
    return image, FaceAutReport(image, True, trivial, fixed, subfaces_ok, admissible)


def face_barycenter(J):
    """Exact barycenter of the face of J (undoubled rational coordinates)."""
    face = face_of(J)
    n = len(face.coords)
    q = J.q
    acc = [Fraction(0)] * q
    for c in face.coords:
        for j in range(q):
            acc[j] += Fraction(c[j], 2)
    return [a / n for a in acc]


# ---------------------------------------------------------------------------
# DOT export of the face poset
# ---------------------------------------------------------------------------

def face_poset_dot(q):
    """Graphviz DOT of the face poset; edges are covering relations of
    refinement (split one block into two)."""
    parts = enumerate_partitions(q)
    name = {J.key(): "f%d" % i for i, J in enumerate(parts)}
    lines = ["digraph face_poset {", '  rankdir="BT";']
    for J in parts:
        lines.append('  %s [label="%s"];' % (name[J.key()], str(J)))
    for J in parts:
        for H in hyperface_refinements(J):
            lines.append("  %s -> %s;" % (name[H.key()], name[J.key()]))
    lines.append("}")
    return "\n".join(lines) + "\n"
