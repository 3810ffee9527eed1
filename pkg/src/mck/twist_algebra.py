"""Exact linear algebra of a leveled graph: relative homology, twist
transvections, cylinder classification, and cohomology polytopes.

The punctured surface (extrema removed) deformation-retracts onto the graph
obtained from the level graph by trading one crossing edge per cylinder for
a transverse edge through it.  Relative 1-homology (mod the saddle set) is
then free on the 2q edges of that graph; the traded edges e_1..e_n expand
over the remaining ones through one relation per cylinder: the two boundary
circles of a cylinder are homologous cross-sections, so the sum of the edges
on its upper boundary equals the sum on its lower boundary.

Everything is over Q; matrices are Fraction rows.  Coordinates on the dual
space are (u~_1..u~_n, u'_{n+1}..u'_{2q}): values on the transverse edges
followed by values on the kept graph edges.
"""

import itertools
from dataclasses import dataclass
from fractions import Fraction

from . import linalg
from . import morse_graph as mg
from .permutohedron import induced_face_automorphism


class TwistAlgebraError(ValueError):
    """Invalid input for the algebra layer."""


class UnsupportedScopeError(TwistAlgebraError):
    """Input outside the sphere scope."""


class AlgebraInvariantViolation(RuntimeError):
    """An exact identity that must hold failed (a bug)."""


def double_factorial_bound(q, s):
    """(2q-1)!! / (2q-2s+1)!!, the upper edge-value bound; an integer."""
    out = 1
    for odd in range(2 * q - 2 * s + 3, 2 * q, 2):
        out *= odd
    return out


# ---------------------------------------------------------------------------
# Homology model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HomologyModel:
    """Edge-class expansions and the cylinder-adapted basis.

    edges: global (atom, local) ids, deterministic order;
    deleted: per cylinder, the traded edge's position in `edges`;
    basis: positions of the kept edges, ascending;
    expansion: 2q rows over the kept-edge columns, row i expanding edge i;
    gamma: per cylinder, the core-circle class over the kept-edge columns.
    """

    edges: tuple
    deleted: tuple
    basis: tuple
    expansion: tuple   # tuple of tuples of Fraction
    gamma: tuple       # tuple of tuples of Fraction
    relations: tuple   # per cylinder, the +-1 relation row over all 2q edges

    @property
    def n(self):
        return len(self.deleted)

    def value_row(self, edge_pos):
        """The functional u -> u([e_i]) over the kept-edge coordinates."""
        return self.expansion[edge_pos]


def _circle_attachments(g):
    """Maps edge-side -> region: ("cap", k) or ("cyl", k) per circle."""
    tables = g.circle_table()
    owner = {}
    for k, cap in enumerate(g.caps):
        owner[tuple(cap.circle)] = ("cap", k)
    for k, (lo, hi) in enumerate(g.cylinders):
        owner[tuple(lo)] = ("cyl", k)
        owner[tuple(hi)] = ("cyl", k)
    up_region, down_region = {}, {}
    for a, tab in enumerate(tables):
        for ci, (side, cyc) in enumerate(tab):
            reg = owner[(a, ci)]
            for e in cyc:
                if side == "upper":
                    up_region[(a, e)] = reg
                else:
                    down_region[(a, e)] = reg
    return up_region, down_region


def _circle_edges(g, ref):
    """Global edge ids on a circle, in trace order."""
    a, ci = ref
    _, cyc = g.circle_table()[a][ci]
    return [(a, e) for e in cyc]


def _choose_deleted(g):
    """One traded edge per cylinder, greedily smallest on its upper boundary.

    Each deletion must merge the cylinder's region with a different region so
    that the count of cap-free regions drops by one; backtracks if the greedy
    order gets stuck (a valid sequence always exists on the sphere, where the
    region-merge graph is forced to stay a forest).
    """
    up_region, down_region = _circle_attachments(g)
    n = len(g.cylinders)
    candidates = []
    for k, (lo, hi) in enumerate(g.cylinders):
        cand = sorted(_circle_edges(g, hi))
        candidates.append(cand)

    def find(parent, x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def search(k, parent, capped, picked):
        if k == n:
            return picked
        for e in candidates[k]:
            r1 = find(parent, down_region[e])
            r2 = find(parent, up_region[e])
            if r1 == r2:
                continue
            if capped[r1] and capped[r2]:
                continue
            p2 = dict(parent)
            c2 = dict(capped)
            p2[r1] = r2
            c2[r2] = c2[r1] or c2[r2]
            out = search(k + 1, p2, c2, picked + [e])
            if out is not None:
                return out
        return None

    parent = {}
    capped = {}
    for k in range(len(g.caps)):
        parent[("cap", k)] = ("cap", k)
        capped[("cap", k)] = True
    for k in range(n):
        parent[("cyl", k)] = ("cyl", k)
        capped[("cyl", k)] = False
    picked = search(0, parent, capped, [])
    if picked is None:
        raise AlgebraInvariantViolation("no valid edge-deletion sequence exists")
    return picked


def homology_model(g):
    """Build the cylinder-adapted basis and the exact expansion matrix."""
    edges = g.global_edges()
    pos = {e: i for i, e in enumerate(edges)}
    nq2 = len(edges)
    n = len(g.cylinders)

    relations = []
    for lo, hi in g.cylinders:
        row = [Fraction(0)] * nq2
        for e in _circle_edges(g, hi):
            row[pos[e]] += 1
        for e in _circle_edges(g, lo):
            row[pos[e]] -= 1
        relations.append(tuple(row))

    deleted_edges = _choose_deleted(g)
    deleted = tuple(pos[e] for e in deleted_edges)
    basis = tuple(i for i in range(nq2) if i not in set(deleted))

    # solve the n relations for the deleted edges over the kept ones
    A = [[relations[k][d] for d in deleted] for k in range(n)]
    m = len(basis)
    rhs_cols = [[-relations[k][b] for k in range(n)] for b in basis]
    sols = [linalg.solve_unique(A, col) if n else [] for col in rhs_cols]

    expansion = []
    for i in range(nq2):
        if i in set(deleted):
            di = deleted.index(i)
            expansion.append(tuple(sols[j][di] for j in range(m)))
        else:
            expansion.append(tuple(Fraction(1 if basis[j] == i else 0)
                                   for j in range(m)))

    # exactness certificate: every relation vanishes on the expansions
    for k in range(n):
        for j in range(m):
            acc = sum((relations[k][i] * expansion[i][j] for i in range(nq2)),
                      Fraction(0))
            if acc != 0:
                raise AlgebraInvariantViolation("expansion does not satisfy "
                                                "cylinder relation %d" % k)
    if linalg.rank([list(r) for r in expansion]) != m:
        raise AlgebraInvariantViolation("expansion matrix is rank deficient")

    gamma = []
    for lo, hi in g.cylinders:
        row = [Fraction(0)] * m
        for e in _circle_edges(g, lo):
            erow = expansion[pos[e]]
            row = [a + b for a, b in zip(row, erow)]
        if all(x == 0 for x in row):
            raise AlgebraInvariantViolation("vanishing core class")
        gamma.append(tuple(row))

    return HomologyModel(edges=tuple(edges), deleted=deleted, basis=basis,
                         expansion=tuple(expansion), gamma=tuple(gamma),
                         relations=tuple(relations))


# ---------------------------------------------------------------------------
# Transvections
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Transvection:
    """Action of the Dehn twist about one cylinder core on dual coordinates:
    u -> u + u(core) * (transverse-edge functional)."""

    cylinder: int
    core: tuple    # core-class row over kept-edge coordinates
    matrix: tuple  # (n + m) x (n + m) rows of Fraction

    def apply(self, u):
        return linalg.mat_vec([list(r) for r in self.matrix], u)


def transvections(g, model):
    """One transvection per cylinder; their displacements span rank n."""
    n, m = model.n, len(model.basis)
    dim = n + m
    out = []
    for ell in range(n):
        mat = linalg.identity(dim)
        for j in range(m):
            mat[ell][n + j] += model.gamma[ell][j]
        out.append(Transvection(cylinder=ell, core=model.gamma[ell],
                                matrix=tuple(tuple(r) for r in mat)))
    if linalg.rank([list(t.core) for t in out]) != n:
        raise AlgebraInvariantViolation("translation lattice rank below n")
    return out


# ---------------------------------------------------------------------------
# Circle classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CircleClassification:
    """Cylinder cores sorted by how they sit around the fixed points.

    nu0 counts cores with a side holding at most one fixed point; the
    remaining cores group into parallel families (consecutive cores bounding
    fixed-point-free annuli with no other such core between).  `order` lists
    original cylinder indices in the renumbering nu0-first, families next
    (chain order), loose cores last; A and B are 1-based index sets in that
    renumbering.  d = rank of the identity-isotopic twist subgroup, c its
    complement: c + d = n.
    """

    n: int
    nu0: int
    families: tuple   # tuples of original cylinder indices, chain order
    order: tuple      # new position (0-based) -> original cylinder index
    e: int
    d: int
    c: int
    A: frozenset      # 1-based positions in the new numbering
    B: frozenset


def _fixed_point_places(g):
    """Fixed points per atom and per cap."""
    atom_fixed = [sum(1 for v in atom.saddles if v in g.fixed_saddles)
                  for atom in g.atoms]
    cap_fixed = [1 if cap.fixed else 0 for cap in g.caps]
    cap_atom = [cap.circle[0] for cap in g.caps]
    return atom_fixed, cap_fixed, cap_atom


def _tree_sides(g):
    """For each cylinder, (atoms on its lower-end side, atoms on the other);
    removing a cylinder disconnects the sphere's assembly tree."""
    t = len(g.atoms)
    adj = {a: [] for a in range(t)}
    for k, (lo, hi) in enumerate(g.cylinders):
        adj[lo[0]].append((hi[0], k))
        adj[hi[0]].append((lo[0], k))
    out = []
    for k, (lo, hi) in enumerate(g.cylinders):
        comp = {lo[0]}
        stack = [lo[0]]
        while stack:
            v = stack.pop()
            for w, kk in adj[v]:
                if kk == k or w in comp:
                    continue
                comp.add(w)
                stack.append(w)
        out.append((frozenset(comp), frozenset(range(t)) - frozenset(comp)))
    return out


def _between(sides, cylinders, a, b):
    """Atoms strictly between the cores of cylinders a and b: intersect the
    b-facing side of a with the a-facing side of b."""
    ends_a = {cylinders[a][0][0], cylinders[a][1][0]}
    ends_b = {cylinders[b][0][0], cylinders[b][1][0]}
    sa = next(s for s in sides[a] if ends_b <= s)
    sb = next(s for s in sides[b] if ends_a <= s)
    return sa & sb


def classify_circles(g):
    """Classification of the cylinder cores; sphere scope only."""
    try:
        rep = mg.validate(g, require_marks=False)
    except mg.EulerCountError as exc:
        raise UnsupportedScopeError("only the sphere is supported: %s" % exc)
    n = rep.n
    if n != rep.t - 1:
        raise AlgebraInvariantViolation("sphere assembly graph is not a tree")

    atom_fixed, cap_fixed, cap_atom = _fixed_point_places(g)

    def fixed_in(atom_set):
        total = sum(atom_fixed[a] for a in atom_set)
        total += sum(cap_fixed[k] for k in range(len(g.caps))
                     if cap_atom[k] in atom_set)
        return total

    sides = _tree_sides(g)
    side_fixed = [(fixed_in(s1), fixed_in(s2)) for s1, s2 in sides]
    nu0_set = sorted(k for k in range(n) if min(side_fixed[k]) <= 1)
    rest = [k for k in range(n) if k not in set(nu0_set)]

    # parallel adjacency among the remaining cores
    adj = {k: set() for k in rest}
    for a, b in itertools.combinations(rest, 2):
        middle = _between(sides, g.cylinders, a, b)
        if fixed_in(middle) != 0:
            continue
        blocked = False
        for c0 in rest:
            if c0 in (a, b):
                continue
            lo, hi = g.cylinders[c0]
            if lo[0] in middle and hi[0] in middle:
                blocked = True
                break
        if not blocked:
            adj[a].add(b)
            adj[b].add(a)

    families = []
    seen = set()
    for k in sorted(rest):
        if k in seen or not adj[k]:
            continue
        comp = {k}
        stack = [k]
        while stack:
            for w in adj[stack.pop()]:
                if w not in comp:
                    comp.add(w)
                    stack.append(w)
        seen |= comp
        ends = sorted(x for x in comp if len(adj[x] & comp) <= 1)
        if not ends:
            raise AlgebraInvariantViolation("parallel family is not a chain")
        chain = [min(ends)]
        while len(chain) < len(comp):
            nxt = [w for w in adj[chain[-1]] & comp if w not in set(chain)]
            if len(nxt) != 1:
                raise AlgebraInvariantViolation("parallel family is not a chain")
            chain.append(nxt[0])
        families.append(tuple(chain))

    loose = sorted(k for k in rest if k not in seen)
    order = list(nu0_set)
    fam_bounds = [len(order)]
    for fam in families:
        order.extend(fam)
        fam_bounds.append(len(order))
    order.extend(loose)

    e = len(families)
    nu_e = fam_bounds[-1]
    d = nu_e - e
    c = n - d
    A = set(fam_bounds[1:]) | set(range(nu_e + 1, n + 1))
    B = set(range(1, n + 1)) - A
    if len(B) != d or len(A) != c:
        raise AlgebraInvariantViolation("A/B split does not match d = nu_e - e")
    return CircleClassification(n=n, nu0=len(nu0_set), families=tuple(families),
                                order=tuple(order), e=e, d=d, c=c,
                                A=frozenset(A), B=frozenset(B))


# ---------------------------------------------------------------------------
# Cohomology polytopes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UPolytope:
    """Exact H-representation of the kept-coordinate polytope:
    1 <= row . u' <= bound for every edge row of the expansion matrix."""

    rows: tuple      # 2q rows over the kept-edge coordinates
    bound: int
    ambient: int
    dim: int
    vertices: tuple  # tuple of coordinate tuples, or None above tiny scale
    is_point: bool


def _polytope_vertices(slab_rows, bound, ambient):
    """Vertices of the box [1, bound]^ambient cut by the slab constraints
    1 <= row.u <= bound.

    A vertex has ambient tight constraints: some box coordinates pinned to a
    bound plus k tight slabs; pinned coordinates are substituted so only a
    k x k system remains, with k at most the (small) slab count."""
    lo, hi = Fraction(1), Fraction(bound)
    nslab = len(slab_rows)
    verts = set()
    for k in range(0, min(nslab, ambient) + 1):
        for free in itertools.combinations(range(ambient), k):
            pinned = [j for j in range(ambient) if j not in free]
            for slabs in itertools.combinations(range(nslab), k):
                A = [[slab_rows[si][j] for j in free] for si in slabs]
                for pins in itertools.product((lo, hi), repeat=len(pinned)):
                    offs = [sum(slab_rows[si][j] * v
                                for j, v in zip(pinned, pins))
                            for si in slabs]
                    for sides in itertools.product((lo, hi), repeat=k):
                        x = linalg.solve_square(
                            A, [sv - off for sv, off in zip(sides, offs)])
                        if x is None or not all(lo <= xj <= hi for xj in x):
                            continue
                        point = [None] * ambient
                        for j, v in zip(pinned, pins):
                            point[j] = v
                        for j, v in zip(free, x):
                            point[j] = v
                        ok = True
                        for row in slab_rows:
                            val = sum((rv * pv for rv, pv in zip(row, point)),
                                      Fraction(0))
                            if not (lo <= val <= hi):
                                ok = False
                                break
                        if ok:
                            verts.add(tuple(point))
    return sorted(verts)


def u_polytope(g, model):
    """The polytope of positive edge values within the double-factorial
    bound, in kept-edge coordinates."""
    q = g.q
    s = len(g.levels)
    bound = double_factorial_bound(q, s)
    ambient = len(model.basis)
    slab_rows = [list(model.expansion[d]) for d in model.deleted]
    verts = _polytope_vertices(slab_rows, bound, ambient)
    if not verts:
        raise AlgebraInvariantViolation("empty edge-value polytope")
    dim = linalg.affine_rank(verts)
    return UPolytope(rows=tuple(model.expansion), bound=bound, ambient=ambient,
                     dim=dim,
                     vertices=tuple(verts) if ambient <= 6 else None,
                     is_point=(len(verts) == 1))


# ---------------------------------------------------------------------------
# Stabilizer action checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AutomorphismCheck:
    """Admissibility and freeness data for one structure automorphism."""

    identity: bool
    consistent: bool          # edge action descends to the quotient
    face_admissible: bool
    values_permuted: bool
    pi_trivial: bool          # loose/non-nu0 cores all fixed
    a_trivial: bool
    b_trivial: bool
    rho_trivial: bool
    degeneracies_ok: bool
    free: bool
    free_exact: bool          # False when only the mod-1 test applied (c > 0)
    cycle_obstructions: tuple  # ((cycle tuple), Fraction offset mod 1)
    admissible: bool


@dataclass(frozen=True)
class StabReport:
    checks: tuple
    all_admissible: bool
    all_free: bool


def _quotient_matrix(model, edge_perm_pos):
    """Matrix of the edge action on the kept-coordinate quotient."""
    m = len(model.basis)
    return [list(model.expansion[edge_perm_pos[b]]) for b in model.basis]


def _edge_perm_positions(g, model, phi):
    em = phi.edge_map(g)
    pos = {e: i for i, e in enumerate(model.edges)}
    return [pos[em[e]] for e in model.edges]


def _circle_offset(g, psi_edge_pos, model, ref):
    """Rotation offset of an edge-map power on one boundary circle."""
    a, ci = ref
    _, cyc = g.circle_table()[a][ci]
    glob = [(a, e) for e in cyc]
    pos = {e: i for i, e in enumerate(model.edges)}
    idx = [pos[e] for e in glob]
    image0 = psi_edge_pos[idx[0]]
    if image0 not in idx:
        raise AlgebraInvariantViolation("boundary circle not preserved")
    o = idx.index(image0)
    L = len(idx)
    for i in range(L):
        if psi_edge_pos[idx[i]] != idx[(i + o) % L]:
            raise AlgebraInvariantViolation("circle image is not a rotation")
    return o, L


def check_stab_action(g, model, autos, classification=None):
    """Run the admissibility checklist and the fixed-point-freeness test on
    every structure automorphism."""
    if classification is None:
        classification = classify_circles(g)
    J = g.level_partition()
    n = model.n
    checks = []
    nu0_orig = set(classification.order[:classification.nu0])

    for phi in autos:
        ident = phi.is_identity()
        edge_pos = _edge_perm_positions(g, model, phi)
        B = _quotient_matrix(model, edge_pos)
        consistent = all(
            list(model.expansion[edge_pos[i]]) ==
            linalg.mat_vec(list(map(list, zip(*B))), list(model.expansion[i]))
            for i in range(len(model.edges)))
        sperm = phi.saddles()
        _, facerep = induced_face_automorphism(lambda x: sperm[x], J)
        cyl_map = phi.cylinder_map(g)
        pi_trivial = all(cyl_map[k] == k for k in range(n) if k not in nu0_orig)
        a_trivial = linalg.mat_eq(B, linalg.identity(len(model.basis)))
        b_trivial = all(v == w for v, w in phi.saddle_map)
        rho_trivial = all(cyl_map[k] == k for k in range(n))
        deg_ok = True
        if a_trivial and not b_trivial:
            deg_ok = False
        if b_trivial:
            if not rho_trivial:
                deg_ok = False
            if not linalg.mat_eq(linalg.mat_mul(B, B),
                                 linalg.identity(len(model.basis))):
                deg_ok = False

        obstructions = []
        free = False
        free_exact = True
        if not ident:
            seen = set()
            for k in range(n):
                if k in seen:
                    continue
                cyc = [k]
                cur = cyl_map[k]
                while cur != k:
                    cyc.append(cur)
                    cur = cyl_map[cur]
                seen |= set(cyc)
                mlen = len(cyc)
                psi = list(range(len(model.edges)))
                for _ in range(mlen):
                    psi = [edge_pos[i] for i in psi]
                lo, hi = g.cylinders[k]
                o_low, L_low = _circle_offset(g, psi, model, lo)
                o_up, L_up = _circle_offset(g, psi, model, hi)
                off = (Fraction(o_up, L_up) - Fraction(o_low, L_low)) % 1
                obstructions.append((tuple(cyc), off))
                if off != 0:
                    free = True
            if classification.c > 0:
                free_exact = False

        admissible = (consistent and facerep.admissible and pi_trivial
                      and deg_ok)
        checks.append(AutomorphismCheck(
            identity=ident, consistent=consistent,
            face_admissible=facerep.admissible,
            values_permuted=consistent, pi_trivial=pi_trivial,
            a_trivial=a_trivial, b_trivial=b_trivial,
            rho_trivial=rho_trivial, degeneracies_ok=deg_ok,
            free=free or ident, free_exact=free_exact,
            cycle_obstructions=tuple(obstructions),
            admissible=admissible or ident))

    return StabReport(checks=tuple(checks),
                      all_admissible=all(c.admissible for c in checks),
                      all_free=all(c.free for c in checks))


# ---------------------------------------------------------------------------
# JSON dump
# ---------------------------------------------------------------------------

def _frac_pair(x):
    f = Fraction(x)
    return [f.numerator, f.denominator]


def algebra_json(g, model=None, classification=None, polytope=None):
    """Per-class algebra dump with rationals as numerator/denominator pairs."""
    import json as _json
    if model is None:
        model = homology_model(g)
    if classification is None:
        classification = classify_circles(g)
    if polytope is None:
        polytope = u_polytope(g, model)
    tvs = transvections(g, model)
    doc = {
        "edges": [list(e) for e in model.edges],
        "deleted": list(model.deleted),
        "basis": list(model.basis),
        "expansion": [[_frac_pair(x) for x in row] for row in model.expansion],
        "transvections": [[[_frac_pair(x) for x in row] for row in t.matrix]
                          for t in tvs],
        "cores": [[_frac_pair(x) for x in t.core] for t in tvs],
        "circles": {
            "n": classification.n, "nu0": classification.nu0,
            "e": classification.e, "d": classification.d,
            "c": classification.c,
            "families": [list(f) for f in classification.families],
            "order": list(classification.order),
            "A": sorted(classification.A), "B": sorted(classification.B),
        },
        "polytope": {
            "rows": [[_frac_pair(x) for x in row] for row in polytope.rows],
            "lo": 1, "hi": polytope.bound, "dim": polytope.dim,
            "vertices": None if polytope.vertices is None else
                [[_frac_pair(x) for x in v] for v in polytope.vertices],
        },
    }
    return _json.dumps(doc, separators=(",", ":"), sort_keys=True)
