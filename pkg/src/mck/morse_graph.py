"""Leveled Morse graphs on the closed oriented sphere.

A class of Morse functions is stored as a leveled embedded graph:

* An *atom* is one connected component of a single critical level: a 4-valent
  graph with a rotation system.  Darts at a saddle are numbered by slots
  0..3 in counterclockwise order; even slots are outgoing, odd slots
  incoming, so directions alternate around every vertex.  Edges are oriented
  from an outgoing dart to an incoming dart, and the region where the
  function exceeds the critical value lies to the left of every edge.

* Boundary circles of an atom's ribbon neighborhood are traced with the
  "turn clockwise" rule.  Walking an edge forward and arriving at the slot-s
  incoming dart, the upper circle (region above) continues from slot s-1 and
  the lower circle (region below) from slot s+1, both mod 4.  Every edge
  lies on exactly one upper and one lower circle, always traversed forward,
  so the 4q edge-sides are partitioned by the circles.

* Lower circles are capped by min-disks or serve as upper ends of cylinders
  coming from below; upper circles are capped by max-disks or feed cylinders
  going up.  A cylinder joins an upper circle of a level-i atom to a lower
  circle of a level-j atom with i < j.

Connectivity together with p - q + r = 2 pins the assembled surface to the
sphere, since every complementary region is a disk or a cylinder by
construction.

Circle references are pairs (atom index, circle index) where circles of an
atom are numbered canonically: lower circles first, then upper circles, each
group ordered by smallest contained edge index, each cycle rotated to start
at its smallest edge.
"""

import itertools
import json
from dataclasses import dataclass, replace as dc_replace

from .permutohedron import OrderedPartition

OUT_SLOTS = (0, 2)
IN_SLOTS = (1, 3)


# ---------------------------------------------------------------------------
# Errors (one class per diagnostic)
# ---------------------------------------------------------------------------

class LMGError(ValueError):
    """Base class for leveled-graph validation failures."""


class StructureError(LMGError):
    """Malformed references, counts, or field inconsistencies."""


class NonAlternatingError(LMGError):
    """An edge does not join an outgoing dart to an incoming dart."""


class UnmatchedDartError(LMGError):
    """Some dart is not covered exactly once by the edge matching."""


class EulerCountError(LMGError):
    """Cap counts violate p - q + r = 2 (or p, r >= 1)."""


class DisconnectedError(LMGError):
    """An atom, or the assembled surface, is not connected."""


class CylinderLevelError(LMGError):
    """A cylinder does not go from a lower level to a strictly higher one."""


class CapSideError(LMGError):
    """A min-disk on an upper circle or a max-disk on a lower circle."""


class LabelCollisionError(LMGError):
    """Duplicate or out-of-range critical point labels."""


class MarkCountError(LMGError):
    """Fewer than three marked critical points."""


class LMGJSONError(LMGError):
    """Malformed serialized graph."""


# ---------------------------------------------------------------------------
# Atoms
# ---------------------------------------------------------------------------

def dart(saddle, slot):
    return (saddle, slot)


@dataclass(frozen=True)
class Atom:
    """One level component: saddles with rotation system and edge matching.

    `edges[i] = (out_dart, in_dart)`; edges are kept sorted by out-dart so
    local edge indices are intrinsic.
    """

    saddles: tuple
    edges: tuple

    @classmethod
    def of(cls, saddles, edges):
        return cls(tuple(sorted(saddles)), tuple(sorted(edges)))

    def check(self):
        sset = set(self.saddles)
        if len(sset) != len(self.saddles):
            raise LabelCollisionError("duplicate saddle label in atom")
        outs = {(v, s) for v in sset for s in OUT_SLOTS}
        ins = {(v, s) for v in sset for s in IN_SLOTS}
        seen_out, seen_in = set(), set()
        for e in self.edges:
            if len(e) != 2:
                raise StructureError("edge is not a dart pair: %r" % (e,))
            o, i = e
            if o not in outs and o not in ins:
                raise StructureError("unknown dart %r" % (o,))
            if i not in outs and i not in ins:
                raise StructureError("unknown dart %r" % (i,))
            if o not in outs or i not in ins:
                raise NonAlternatingError(
                    "edge %r does not join an outgoing dart to an incoming dart" % (e,))
            if o in seen_out or i in seen_in:
                raise UnmatchedDartError("dart matched twice in %r" % (e,))
            seen_out.add(o)
            seen_in.add(i)
        if seen_out != outs or seen_in != ins:
            missing = (outs - seen_out) | (ins - seen_in)
            raise UnmatchedDartError("unmatched darts: %s" % sorted(missing))
        if not self.connected():
            raise DisconnectedError("atom on saddles %s is not connected" % (self.saddles,))

    def connected(self):
        if not self.saddles:
            return False
        adj = {v: set() for v in self.saddles}
        for (ov, _), (iv, _) in self.edges:
            adj[ov].add(iv)
            adj[iv].add(ov)
        seen = {self.saddles[0]}
        stack = [self.saddles[0]]
        while stack:
            for w in adj[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == len(self.saddles)

    def edge_at_out(self):
        """Map out-dart -> local edge index."""
        return {e[0]: i for i, e in enumerate(self.edges)}

    def _trace(self, turn):
        """Decompose edges into cycles: after arriving at incoming slot s,
        continue from outgoing slot (s + turn) mod 4."""
        by_out = self.edge_at_out()
        succ = {}
        for i, (_, (v, s)) in enumerate(self.edges):
            succ[i] = by_out[(v, (s + turn) % 4)]
        cycles = []
        seen = set()
        for start in range(len(self.edges)):
            if start in seen:
                continue
            cyc = []
            cur = start
            while cur not in seen:
                seen.add(cur)
                cyc.append(cur)
                cur = succ[cur]
            m = cyc.index(min(cyc))
            cycles.append(tuple(cyc[m:] + cyc[:m]))
        return tuple(sorted(cycles))

    def upper_circles(self):
        """Boundary circles with the region above; edge cycles, forward."""
        return self._trace(-1)

    def lower_circles(self):
        """Boundary circles with the region below; edge cycles, forward."""
        return self._trace(+1)

    def circles(self):
        """Canonical circle list: (side, edge cycle), lowers then uppers."""
        lows = [("lower", c) for c in self.lower_circles()]
        ups = [("upper", c) for c in self.upper_circles()]
        return tuple(lows + ups)


# ---------------------------------------------------------------------------
# The leveled graph
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Cap:
    circle: tuple  # (atom index, circle index)
    kind: str      # "min" | "max"
    label: int
    marked: bool
    fixed: bool


@dataclass(frozen=True)
class LMG:
    """A leveled Morse graph: atoms arranged in levels, capped and tubed."""

    q: int
    p: int
    r: int
    levels: tuple      # tuple of tuple of atom indices, bottom level first
    atoms: tuple       # tuple of Atom
    caps: tuple        # tuple of Cap
    cylinders: tuple   # tuple of ((a,c) lower end = upper circle, (a,c) upper end = lower circle)
    marked_saddles: frozenset
    fixed_saddles: frozenset

    # -- basic derived data ------------------------------------------------

    def level_of_atom(self, a):
        for k, lev in enumerate(self.levels):
            if a in lev:
                return k + 1
        raise StructureError("atom %d is on no level" % a)

    def atom_levels(self):
        out = {}
        for k, lev in enumerate(self.levels):
            for a in lev:
                out[a] = k + 1
        return out

    def level_partition(self):
        """Ordered partition of saddle labels by level (J)."""
        blocks = []
        for lev in self.levels:
            blk = set()
            for a in lev:
                blk |= set(self.atoms[a].saddles)
            blocks.append(frozenset(blk))
        return OrderedPartition.of(blocks, self.q)

    def circle_table(self):
        """Per atom, the canonical (side, cycle) circle list."""
        return [a.circles() for a in self.atoms]

    def marking_counts(self):
        """((p_hat, q_hat, r_hat), (p_star, q_star, r_star))."""
        ph = sum(1 for c in self.caps if c.kind == "min" and c.marked)
        rh = sum(1 for c in self.caps if c.kind == "max" and c.marked)
        ps = sum(1 for c in self.caps if c.kind == "min" and c.fixed)
        rs = sum(1 for c in self.caps if c.kind == "max" and c.fixed)
        return ((ph, len(self.marked_saddles), rh),
                (ps, len(self.fixed_saddles), rs))

    def global_edges(self):
        """Deterministic global edge order: (atom index, local edge index)."""
        return [(a, i) for a in range(len(self.atoms))
                for i in range(len(self.atoms[a].edges))]

    def replace(self, **kw):
        return dc_replace(self, **kw)


@dataclass(frozen=True)
class RegionReport:
    p: int
    q: int
    r: int
    s: int
    t: int
    n: int
    min_disks: tuple   # sorted min labels
    max_disks: tuple   # sorted max labels
    cylinders: tuple   # (lower level, upper level) per cylinder, 1-based


def validate(g, require_marks=True):
    """Full validation; returns a RegionReport on success.

    Raises a distinct LMGError subclass per diagnostic.  `require_marks`
    controls the marked-count condition (more than chi(S^2) = 2 marked
    critical points); structural checks always run.
    """
    if not g.atoms:
        raise StructureError("no atoms")
    for atom in g.atoms:
        atom.check()

    placed = [a for lev in g.levels for a in lev]
    if sorted(placed) != list(range(len(g.atoms))):
        raise StructureError("levels must list every atom exactly once")
    if any(not lev for lev in g.levels):
        raise StructureError("empty level")

    labels = [v for atom in g.atoms for v in atom.saddles]
    if len(set(labels)) != len(labels):
        raise LabelCollisionError("saddle label used by two atoms")
    if set(labels) != set(range(1, g.q + 1)):
        raise StructureError("saddle labels must be {1..q}")

    tables = g.circle_table()
    usage = {}

    def use(ref, what):
        a, c = ref
        if not (0 <= a < len(g.atoms)) or not (0 <= c < len(tables[a])):
            raise StructureError("bad circle reference %r" % (ref,))
        if ref in usage:
            raise StructureError("circle %r used twice (%s and %s)"
                                 % (ref, usage[ref], what))
        usage[ref] = what

    for cap in g.caps:
        if cap.kind not in ("min", "max"):
            raise StructureError("bad cap kind %r" % (cap.kind,))
        use(tuple(cap.circle), "cap")
        side = tables[cap.circle[0]][cap.circle[1]][0]
        if cap.kind == "min" and side != "lower":
            raise CapSideError("min-disk on an upper circle: %r" % (cap,))
        if cap.kind == "max" and side != "upper":
            raise CapSideError("max-disk on a lower circle: %r" % (cap,))
        if cap.fixed and not cap.marked:
            raise StructureError("fixed cap must be marked: %r" % (cap,))

    levels_of = g.atom_levels()
    cyl_levels = []
    for lo, hi in g.cylinders:
        use(tuple(lo), "cylinder")
        use(tuple(hi), "cylinder")
        if tables[lo[0]][lo[1]][0] != "upper":
            raise CapSideError("cylinder lower end %r is not an upper circle" % (lo,))
        if tables[hi[0]][hi[1]][0] != "lower":
            raise CapSideError("cylinder upper end %r is not a lower circle" % (hi,))
        li, lj = levels_of[lo[0]], levels_of[hi[0]]
        if li >= lj:
            raise CylinderLevelError("cylinder pairs level %d with level %d" % (li, lj))
        cyl_levels.append((li, lj))

    for a in range(len(g.atoms)):
        for c in range(len(tables[a])):
            if (a, c) not in usage:
                raise StructureError("circle (%d, %d) neither capped nor paired" % (a, c))

    mins = sorted(c.label for c in g.caps if c.kind == "min")
    maxs = sorted(c.label for c in g.caps if c.kind == "max")
    if len(set(mins)) != len(mins) or len(set(maxs)) != len(maxs):
        raise LabelCollisionError("duplicate extremum label")
    p_actual, r_actual = len(mins), len(maxs)
    if p_actual - g.q + r_actual != 2:
        raise EulerCountError("p - q + r = %d - %d + %d != 2"
                              % (p_actual, g.q, r_actual))
    if p_actual < 1 or r_actual < 1:
        raise EulerCountError("need p >= 1 and r >= 1")
    if (p_actual, r_actual) != (g.p, g.r):
        raise StructureError("declared (p, r) = (%d, %d) but found (%d, %d)"
                             % (g.p, g.r, p_actual, r_actual))
    if mins != list(range(1, p_actual + 1)) or maxs != list(range(1, r_actual + 1)):
        raise LabelCollisionError("extremum labels must be 1..p and 1..r")
    if not g.marked_saddles <= set(range(1, g.q + 1)):
        raise LabelCollisionError("marked saddle outside {1..q}")
    if not g.fixed_saddles <= g.marked_saddles:
        raise StructureError("fixed saddles must be marked")

    # surface connectivity through cylinders
    if len(g.atoms) > 1:
        adj = {a: set() for a in range(len(g.atoms))}
        for lo, hi in g.cylinders:
            adj[lo[0]].add(hi[0])
            adj[hi[0]].add(lo[0])
        seen = {0}
        stack = [0]
        while stack:
            for w in adj[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        if len(seen) != len(g.atoms):
            raise DisconnectedError("assembled surface is not connected")

    (ph, qh, rh), _ = g.marking_counts()
    if require_marks and ph + qh + rh <= 2:
        raise MarkCountError("need more than 2 marked critical points, have %d"
                             % (ph + qh + rh))

    return RegionReport(
        p=p_actual, q=g.q, r=r_actual, s=len(g.levels), t=len(g.atoms),
        n=len(g.cylinders), min_disks=tuple(mins), max_disks=tuple(maxs),
        cylinders=tuple(cyl_levels))


@dataclass(frozen=True)
class Invariants:
    s: int
    t: int
    n: int
    q: int
    p: int
    r: int
    J: OrderedPartition


def invariants(g):
    """Headline invariants of a validated graph."""
    return Invariants(s=len(g.levels), t=len(g.atoms), n=len(g.cylinders),
                      q=g.q, p=g.p, r=g.r, J=g.level_partition())


# ---------------------------------------------------------------------------
# Canonical form and automorphisms
# ---------------------------------------------------------------------------
#
# A framing is a choice of (i) an ordering of the atoms inside each level and
# (ii) one outgoing root dart per atom.  Each framing yields a deterministic
# relabeling of all darts and hence a full encoding of the structure; the
# canonical form is the lexicographic minimum over framings.  Marked labels
# are embedded in the encoding, unmarked critical points encode as -1, so
# equality of encodings is exactly orientation-preserving level-preserving
# isomorphism fixing marked points.  Every framing achieving the minimum
# yields one automorphism.

def _atom_traversal(atom, root):
    """Relabel darts from an outgoing root dart.

    Returns (code, dart_map) where dart_map maps (saddle, slot) to the new
    dart id vertex_index*4 + rotated_slot and code is the hashable atom
    encoding (vertex count, relabeled edge list); saddle order is the
    discovery order.
    """
    by_out = {e[0]: e for e in atom.edges}
    by_in = {e[1]: e for e in atom.edges}
    rot = {}     # saddle -> slot rotation (new = (old - rot) % 4)
    order = []   # discovery order of saddles
    rot[root[0]] = root[1]
    order.append(root[0])
    i = 0
    while i < len(order):
        v = order[i]
        i += 1
        for new_slot in range(4):
            old_slot = (new_slot + rot[v]) % 4
            d = (v, old_slot)
            partner = by_out[d][1] if old_slot % 2 == 0 else by_in[d][0]
            w, t = partner
            if w not in rot:
                # entry via the partner dart: incoming darts land on slot 1,
                # outgoing on slot 0
                rot[w] = (t - (1 if t % 2 else 0)) % 4
                order.append(w)
    vidx = {v: i for i, v in enumerate(order)}

    def new_id(d):
        v, s = d
        return vidx[v] * 4 + ((s - rot[v]) % 4)

    edges = tuple(sorted((new_id(o), new_id(i)) for o, i in atom.edges))
    dart_map = {(v, s): vidx[v] * 4 + ((s - rot[v]) % 4)
                for v in atom.saddles for s in range(4)}
    return (len(atom.saddles), edges), dart_map, tuple(order)


def _atom_min_codes(atom, marked, fixed):
    """Minimal atom encoding over root darts, with all realizing framings.

    The encoding appends per-vertex saddle tags (label if marked else -1,
    fixed flag) in discovery order.
    """
    best = None
    realizations = []
    for v in atom.saddles:
        for s in OUT_SLOTS:
            (nv, edges), dmap, order = _atom_traversal(atom, (v, s))
            tags = tuple((x if x in marked else -1, x in fixed) for x in order)
            code = (nv, edges, tags)
            if best is None or code < best:
                best = code
                realizations = [(dmap, order)]
            elif code == best:
                realizations.append((dmap, order))
    return best, realizations


def _relabeled_circles(atom, dmap):
    """Canonical circles of an atom under a dart relabeling.

    Returns the circle list as (side, cycle of relabeled edge ids) plus the
    map from original circle index to relabeled circle index.
    """
    # relabeled edges sorted by out-dart id define the relabeled edge order
    relab = sorted((dmap[o], dmap[i], orig) for orig, (o, i) in enumerate(atom.edges))
    new_of_orig = {orig: k for k, (_, _, orig) in enumerate(relab)}
    out = []
    for side, cyc in atom.circles():
        newcyc = [new_of_orig[e] for e in cyc]
        m = newcyc.index(min(newcyc))
        out.append((side, tuple(newcyc[m:] + newcyc[:m])))
    # canonical order: lowers then uppers, by smallest edge id
    idx = sorted(range(len(out)), key=lambda k: (out[k][0] != "lower", out[k][1]))
    canon = tuple(out[k] for k in idx)
    orig_to_new = {orig: new for new, orig in enumerate(idx)}
    return canon, orig_to_new


def _framing_encoding(g, arrangement, picks):
    """Full encoding for one framing.

    arrangement: tuple of original atom indices in framing order (levels
    concatenated); picks[a] = (atom code, dart map) chosen for atom a.
    """
    pos = {a: i for i, a in enumerate(arrangement)}
    circle_maps = {}
    atom_codes = []
    for a in arrangement:
        code, dmap = picks[a]
        atom_codes.append(code)
        circle_maps[a] = _relabeled_circles(g.atoms[a], dmap)[1]

    def ref(circle):
        a, c = circle
        return (pos[a], circle_maps[a][c])

    caps = tuple(sorted(
        (ref(c.circle), c.kind, c.label if c.marked else -1, c.marked, c.fixed)
        for c in g.caps))
    cyls = tuple(sorted(tuple(sorted((ref(lo), ref(hi)))) for lo, hi in g.cylinders))
    header = (g.q, g.p, g.r,
              tuple(sorted(g.marked_saddles)), tuple(sorted(g.fixed_saddles)))
    level_sizes = tuple(len(lev) for lev in g.levels)
    return (header, level_sizes, tuple(atom_codes), caps, cyls)


def _min_framings(g):
    """All framings achieving the minimal encoding.

    Returns (encoding, list of (arrangement, {atom: dart_map}))."""
    marked, fixed = g.marked_saddles, g.fixed_saddles
    per_atom = {}
    for a, atom in enumerate(g.atoms):
        code, reals = _atom_min_codes(atom, marked, fixed)
        per_atom[a] = (code, reals)

    level_orders = []
    for lev in g.levels:
        ordered = sorted(lev, key=lambda a: per_atom[a][0])
        groups = [list(grp) for _, grp in
                  itertools.groupby(ordered, key=lambda a: per_atom[a][0])]
        perms = [list(p) for p in itertools.product(
            *[list(itertools.permutations(grp)) for grp in groups])]
        level_orders.append([tuple(itertools.chain.from_iterable(p)) for p in perms])

    best = None
    winners = []
    for combo in itertools.product(*level_orders):
        arrangement = tuple(itertools.chain.from_iterable(combo))
        root_choices = [per_atom[a][1] for a in arrangement]
        for picked in itertools.product(*root_choices):
            picks = {a: (per_atom[a][0], dmap)
                     for a, (dmap, _) in zip(arrangement, picked)}
            enc = _framing_encoding(g, arrangement, picks)
            if best is None or enc < best:
                best = enc
                winners = [(arrangement, {a: picks[a][1] for a in arrangement})]
            elif enc == best:
                winners.append((arrangement, {a: picks[a][1] for a in arrangement}))
    return best, winners


def _encode_bytes(enc):
    return json.dumps(enc, separators=(",", ":")).encode("ascii")


def canonical_form(g):
    """Canonical byte string: equal iff isomorphic by an orientation- and
    level-preserving isomorphism fixing marked labels pointwise."""
    enc, _ = _min_framings(g)
    return _encode_bytes(enc)


def decode_canonical(data):
    """Rebuild a representative graph from a canonical form.

    Unmarked critical points get the smallest labels not used by marked ones,
    in encoding order, so re-encoding reproduces the same canonical form.
    """
    try:
        header, level_sizes, atom_codes, caps, cyls = json.loads(data.decode("ascii"))
        q, p, r, marked_saddles, fixed_saddles = header
    except (ValueError, UnicodeDecodeError) as exc:
        raise LMGJSONError("undecodable canonical form: %s" % exc)

    atoms = []
    saddle_labels = []
    free = iter(x for x in range(1, q + 1)
                if x not in set(marked_saddles))
    for nv, edges, tags in atom_codes:
        labels = [tag[0] if tag[0] != -1 else next(free) for tag in tags]
        saddle_labels.append(labels)
        es = [((labels[o // 4], o % 4), (labels[i // 4], i % 4)) for o, i in edges]
        atoms.append(Atom.of(labels, es))

    levels = []
    k = 0
    for size in level_sizes:
        levels.append(tuple(range(k, k + size)))
        k += size

    # circle indices in the encoding refer to the relabeled atoms, which is
    # exactly the labeling the rebuilt atoms carry
    free_min = iter(x for x in range(1, p + 1)
                    if x not in {lab for _, kind, lab, m, _ in caps
                                 if kind == "min" and m})
    free_max = iter(x for x in range(1, r + 1)
                    if x not in {lab for _, kind, lab, m, _ in caps
                                 if kind == "max" and m})
    cap_objs = []
    for ref, kind, lab, m, fx in caps:
        if lab == -1:
            lab = next(free_min) if kind == "min" else next(free_max)
        cap_objs.append(Cap(circle=tuple(ref), kind=kind, label=lab,
                            marked=bool(m), fixed=bool(fx)))

    cyl_objs = []
    for pair in cyls:
        (a1, c1), (a2, c2) = pair
        # orient: the upper-circle end is the lower end of the cylinder
        side1 = atoms[a1].circles()[c1][0]
        lo, hi = ((a1, c1), (a2, c2)) if side1 == "upper" else ((a2, c2), (a1, c1))
        cyl_objs.append((tuple(lo), tuple(hi)))

    return LMG(q=q, p=p, r=r, levels=tuple(levels), atoms=tuple(atoms),
               caps=tuple(cap_objs), cylinders=tuple(sorted(cyl_objs)),
               marked_saddles=frozenset(marked_saddles),
               fixed_saddles=frozenset(fixed_saddles))


@dataclass(frozen=True)
class Automorphism:
    """A structure automorphism: level-preserving, orientation-preserving,
    fixing marked labels pointwise."""

    atom_map: tuple     # atom index -> atom index
    dart_map: tuple     # sorted ((saddle, slot), (saddle, slot)) pairs
    saddle_map: tuple   # saddle label -> image, as sorted pairs

    def darts(self):
        return dict(self.dart_map)

    def saddles(self):
        return dict(self.saddle_map)

    def atom_of(self, a):
        return dict(self.atom_map)[a]

    def is_identity(self):
        return all(a == b for a, b in self.dart_map)

    def edge_map(self, g):
        """Global edge permutation {(atom, edge): (atom, edge)}."""
        dm = self.darts()
        out = {}
        for a, atom in enumerate(g.atoms):
            ta = self.atom_of(a)
            target = g.atoms[ta].edge_at_out()
            for i, (o, _) in enumerate(atom.edges):
                out[(a, i)] = (ta, target[dm[o]])
        return out

    def cylinder_map(self, g):
        """Cylinder index permutation induced by the circle action."""
        cm = self.circle_map(g)
        ends = {tuple(lo): k for k, (lo, hi) in enumerate(g.cylinders)}
        return {k: ends[cm[tuple(lo)]] for k, (lo, hi) in enumerate(g.cylinders)}

    def circle_map(self, g):
        """Circle reference permutation {(atom, ci): (atom, ci)}."""
        em = self.edge_map(g)
        tables = g.circle_table()
        lookup = {}
        for a, tab in enumerate(tables):
            for ci, (side, cyc) in enumerate(tab):
                for e in cyc:
                    lookup[(a, e, side)] = ci
        out = {}
        for a, tab in enumerate(tables):
            for ci, (side, cyc) in enumerate(tab):
                ta, te = em[(a, cyc[0])]
                out[(a, ci)] = (ta, lookup[(ta, te, side)])
        return out


def automorphisms(g):
    """All structure automorphisms, identity first.

    The group is extracted from the canonical-form machinery: every framing
    realizing the minimal encoding differs from a reference one by exactly
    one automorphism.
    """
    _, winners = _min_framings(g)
    ref_arr, ref_maps = winners[0]
    ref_global = {}
    for ppos, a in enumerate(ref_arr):
        for d, nid in ref_maps[a].items():
            ref_global[(ppos, nid)] = d

    seen = set()
    out = []
    for arr, maps in winners:
        dartmap = {}
        atommap = {}
        for ppos, a in enumerate(arr):
            atommap[ref_arr[ppos]] = a
            inv = {nid: d for d, nid in maps[a].items()}
            for (pp, nid), src in ref_global.items():
                if pp == ppos:
                    dartmap[src] = inv[nid]
        key = tuple(sorted(dartmap.items()))
        if key in seen:
            continue
        seen.add(key)
        saddlemap = tuple(sorted({v: dartmap[(v, 0)][0]
                                  for a in g.atoms for v in a.saddles}.items()))
        out.append(Automorphism(atom_map=tuple(sorted(atommap.items())),
                                dart_map=key, saddle_map=saddlemap))
    out.sort(key=lambda phi: (not phi.is_identity(), phi.dart_map))
    return out


# ---------------------------------------------------------------------------
# Mirror and duality
# ---------------------------------------------------------------------------

def _rebuilt(g, slot_map, swap_updown, reverse_levels):
    """Shared machinery for mirror (reverse rotations) and dual (flip f)."""
    new_atoms = []
    circle_maps = []
    for atom in g.atoms:
        edges = [((iv, slot_map(is_)), (ov, slot_map(os)))
                 for (ov, os), (iv, is_) in atom.edges]
        na = Atom.of(atom.saddles, edges)
        # old local edge -> new local edge: old (o,i) becomes the new edge
        # whose out-dart is the image of the old in-dart
        by_out = na.edge_at_out()
        bij = {k: by_out[(iv, slot_map(is_))]
               for k, ((ov, os), (iv, is_)) in enumerate(atom.edges)}
        table = {}
        for ci, (side, cyc) in enumerate(na.circles()):
            table[(side, frozenset(cyc))] = ci
        cmap = {}
        for ci, (side, cyc) in enumerate(atom.circles()):
            nside = ({"upper": "lower", "lower": "upper"}[side]
                     if swap_updown else side)
            cmap[ci] = table[(nside, frozenset(bij[e] for e in cyc))]
        new_atoms.append(na)
        circle_maps.append(cmap)

    if reverse_levels:
        levels = tuple(tuple(lev) for lev in reversed(g.levels))
    else:
        levels = g.levels

    def ref(c):
        a, ci = c
        return (a, circle_maps[a][ci])

    caps = []
    for c in g.caps:
        kind = ({"min": "max", "max": "min"}[c.kind] if swap_updown else c.kind)
        caps.append(Cap(circle=ref(tuple(c.circle)), kind=kind, label=c.label,
                        marked=c.marked, fixed=c.fixed))
    cyls = []
    for lo, hi in g.cylinders:
        if swap_updown:
            cyls.append((ref(tuple(hi)), ref(tuple(lo))))
        else:
            cyls.append((ref(tuple(lo)), ref(tuple(hi))))
    p, r = (g.r, g.p) if swap_updown else (g.p, g.r)
    return LMG(q=g.q, p=p, r=r, levels=levels, atoms=tuple(new_atoms),
               caps=tuple(caps), cylinders=tuple(sorted(cyls)),
               marked_saddles=g.marked_saddles, fixed_saddles=g.fixed_saddles)


def mirror(g):
    """Reverse all cyclic orders (orientation reversal); min/max and levels
    keep their roles, edge directions flip."""
    return _rebuilt(g, lambda s: (1 - s) % 4,
                    swap_updown=False, reverse_levels=False)


def dual(g):
    """Flip the function upside down: levels reverse, minima become maxima,
    edge directions flip, rotations are kept."""
    return _rebuilt(g, lambda s: (s - 1) % 4,
                    swap_updown=True, reverse_levels=True)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def to_json(g):
    """Stable JSON text for a leveled graph."""
    atoms = []
    for atom in g.atoms:
        spos = {v: i for i, v in enumerate(atom.saddles)}
        atoms.append({
            "saddles": list(atom.saddles),
            "darts": 4 * len(atom.saddles),
            "edges": [[spos[o[0]] * 4 + o[1], spos[i[0]] * 4 + i[1]]
                      for o, i in atom.edges],
        })
    doc = {
        "q": g.q, "p": g.p, "r": g.r,
        "levels": [list(lev) for lev in g.levels],
        "atoms": atoms,
        "caps": [{"circle": list(c.circle), "kind": c.kind, "label": c.label,
                  "marked": c.marked, "fixed": c.fixed} for c in g.caps],
        "cylinders": [[list(lo), list(hi)] for lo, hi in g.cylinders],
        "marked_saddles": sorted(g.marked_saddles),
        "fixed_saddles": sorted(g.fixed_saddles),
    }
    return json.dumps(doc, separators=(",", ":"), sort_keys=True)


def from_json(text):
    """Parse a leveled graph; raises LMGJSONError naming the offending key."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        doc = json.loads(text)
    except ValueError as exc:
        raise LMGJSONError("invalid JSON: %s" % exc)
    for key in ("q", "p", "r", "levels", "atoms", "caps", "cylinders",
                "marked_saddles", "fixed_saddles"):
        if key not in doc:
            raise LMGJSONError("missing key %r" % key)
    try:
        atoms = []
        for ad in doc["atoms"]:
            saddles = list(ad["saddles"])
            edges = [((saddles[o // 4], o % 4), (saddles[i // 4], i % 4))
                     for o, i in ad["edges"]]
            atoms.append(Atom.of(saddles, edges))
        caps = tuple(Cap(circle=tuple(cd["circle"]), kind=cd["kind"],
                         label=cd["label"], marked=bool(cd["marked"]),
                         fixed=bool(cd["fixed"]))
                     for cd in doc["caps"])
        cylinders = tuple(sorted((tuple(lo), tuple(hi))
                                 for lo, hi in doc["cylinders"]))
        return LMG(q=doc["q"], p=doc["p"], r=doc["r"],
                   levels=tuple(tuple(lev) for lev in doc["levels"]),
                   atoms=tuple(atoms), caps=caps, cylinders=cylinders,
                   marked_saddles=frozenset(doc["marked_saddles"]),
                   fixed_saddles=frozenset(doc["fixed_saddles"]))
    except (KeyError, IndexError, TypeError) as exc:
        raise LMGJSONError("malformed graph document: %r" % (exc,))


def to_dot(g):
    """Graphviz DOT: one subgraph per level, caps and cylinders drawn."""
    lines = ["digraph lmg {", '  rankdir="BT";']
    for k, lev in enumerate(g.levels):
        lines.append('  subgraph cluster_level_%d {' % (k + 1))
        lines.append('    label="level %d";' % (k + 1))
        for a in lev:
            for v in g.atoms[a].saddles:
                mark = "*" if v in g.fixed_saddles else ("+" if v in g.marked_saddles else "")
                lines.append('    s%d [label="s%d%s" shape=circle];' % (v, v, mark))
        lines.append("  }")
    for a, atom in enumerate(g.atoms):
        for i, (o, t) in enumerate(atom.edges):
            lines.append('  s%d -> s%d [label="e%d.%d"];' % (o[0], t[0], a, i))
    for c in g.caps:
        anchor = g.atoms[c.circle[0]].saddles[0]
        node = "%s%d" % (c.kind, c.label)
        shape = "triangle" if c.kind == "max" else "invtriangle"
        mark = "*" if c.fixed else ("+" if c.marked else "")
        lines.append('  %s [label="%s%s" shape=%s];' % (node, node, mark, shape))
        if c.kind == "max":
            lines.append('  s%d -> %s [style=dotted arrowhead=none label="c%d.%d"];'
                         % (anchor, node, c.circle[0], c.circle[1]))
        else:
            lines.append('  %s -> s%d [style=dotted arrowhead=none label="c%d.%d"];'
                         % (node, anchor, c.circle[0], c.circle[1]))
    for k, (lo, hi) in enumerate(g.cylinders):
        lines.append('  s%d -> s%d [style=dashed label="Z%d"];'
                     % (g.atoms[lo[0]].saddles[0], g.atoms[hi[0]].saddles[0], k + 1))
    lines.append("}")
    return "\n".join(lines) + "\n"
