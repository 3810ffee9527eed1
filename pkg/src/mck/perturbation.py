"""Saddle resolution: refining the level partition of a leveled graph.

Splitting one level whose saddle set is divided into ordered sub-blocks
B_1 < ... < B_m models a perturbation that pulls the saddle values apart.
Inside the ribbon neighborhood of each old level atom, every sub-level k
carries one curve system C_k: saddles of B_k stay vertices, saddles of lower
sub-blocks are resolved upward (the curve passes above them, through the two
up-sectors), saddles of higher sub-blocks downward.  With slots numbered as
in `morse_graph`, arriving at the incoming slot-s dart the upward resolution
continues from slot s-1, the downward one from slot s+1.

Between consecutive sub-levels the regular interface curves I_k (all blocks
<= k resolved up, the rest down) cut the ribbon into annuli.  Each interface
curve traverses every old edge exactly once, so its edge set matches it both
to the circle below (an upper circle of system C_k, or an old lower circle
of the atom for k = 0) and to the circle above (a lower circle of C_{k+1},
or an old upper circle for k = m).  Saddle-free components of a C_k are kept
transiently: they bound annuli on both sides and merge them.  The maximal
annulus chains are the new complementary regions: chains ending on old
circles extend the caps and cylinders that were attached there, chains
between two new-atom circles become new cylinders.
"""

import itertools
from dataclasses import dataclass

from . import morse_graph as mg
from .permutohedron import OrderedPartition, refines_eq


class PerturbationError(ValueError):
    """Invalid refinement or sub-block request."""


class InvariantViolation(RuntimeError):
    """The resolution produced a structurally invalid graph (a bug)."""


# ---------------------------------------------------------------------------
# Local resolution data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Resolution:
    """Reconnection arcs replacing one saddle at a nearby regular level.

    Each arc joins the incoming dart it is entered from to the outgoing dart
    it leaves by; "up" arcs run through the two up-sectors, "down" arcs
    through the two down-sectors.
    """

    vertex: int
    direction: str  # "up" | "down"
    arcs: tuple     # two (in_dart, out_dart) pairs


def resolution(vertex, direction):
    if direction == "up":
        arcs = (((vertex, 1), (vertex, 0)), ((vertex, 3), (vertex, 2)))
    elif direction == "down":
        arcs = (((vertex, 1), (vertex, 2)), ((vertex, 3), (vertex, 0)))
    else:
        raise PerturbationError("direction must be 'up' or 'down'")
    return Resolution(vertex=vertex, direction=direction, arcs=arcs)


@dataclass(frozen=True)
class Refinement:
    """A refinement J' <= J together with the per-block sub-block lists."""

    source: OrderedPartition
    target: OrderedPartition
    per_block: tuple  # per source block, the tuple of target blocks refining it

    @classmethod
    def of(cls, source, target):
        if not refines_eq(target, source):
            raise PerturbationError("%s does not refine %s" % (target, source))
        groups = []
        i = 0
        for b in source.blocks:
            grp = []
            acc = set()
            while acc != set(b):
                grp.append(target.blocks[i])
                acc |= target.blocks[i]
                i += 1
            groups.append(tuple(grp))
        return cls(source=source, target=target, per_block=tuple(groups))


# ---------------------------------------------------------------------------
# One-atom surgery
# ---------------------------------------------------------------------------

def _interface_cycles(atom, blk, k):
    """Interface curves I_k as edge-index cycles (each edge used once)."""
    by_out = atom.edge_at_out()
    succ = []
    for _, (v, s) in atom.edges:
        turn = -1 if blk[v] <= k else +1
        succ.append(by_out[(v, (s + turn) % 4)])
    cycles = []
    seen = set()
    for start in range(len(atom.edges)):
        if start in seen:
            continue
        cyc = []
        cur = start
        while cur not in seen:
            seen.add(cur)
            cyc.append(cur)
            cur = succ[cur]
        cycles.append(frozenset(cyc))
    return cycles


def _sublevel_system(atom, blk, k):
    """Curve system C_k of one old atom.

    Returns (new_atoms, transients) where new_atoms is a list of
    (Atom, paths) with paths mapping the new atom's local edge index to the
    frozenset of old edge indices its strand path covers, ordered by smallest
    saddle label; transients is the list of old-edge frozensets of the
    saddle-free closed curves.
    """
    by_out = atom.edge_at_out()
    kept = [v for v in atom.saddles if blk[v] == k]
    comp_edges = {}
    used = set()
    for v in kept:
        for slot in mg.OUT_SLOTS:
            o = (v, slot)
            path = []
            cur = by_out[o]
            while True:
                path.append(cur)
                w, s = atom.edges[cur][1]
                if blk[w] == k:
                    comp_edges[o] = ((o, (w, s)), frozenset(path))
                    used.update(path)
                    break
                turn = -1 if blk[w] < k else +1
                cur = by_out[(w, (s + turn) % 4)]

    # saddle-free closed curves on the remaining edges
    transients = []
    seen = set(used)
    for start in range(len(atom.edges)):
        if start in seen:
            continue
        cyc = []
        cur = start
        while cur not in seen:
            seen.add(cur)
            cyc.append(cur)
            w, s = atom.edges[cur][1]
            assert blk[w] != k
            turn = -1 if blk[w] < k else +1
            cur = by_out[(w, (s + turn) % 4)]
        transients.append(frozenset(cyc))

    # group kept saddles into connected components
    parent = {v: v for v in kept}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for (o, i), _ in comp_edges.values():
        a, b = find(o[0]), find(i[0])
        if a != b:
            parent[a] = b

    groups = {}
    for v in kept:
        groups.setdefault(find(v), set()).add(v)
    new_atoms = []
    for root in sorted(groups, key=lambda r: min(groups[r])):
        saddles = sorted(groups[root])
        pairs = [comp_edges[(v, slot)] for v in saddles for slot in mg.OUT_SLOTS]
        new_atom = mg.Atom.of(saddles, [e for e, _ in pairs])
        path_by_out = {e[0]: path for e, path in pairs}
        paths = {idx: path_by_out[o] for idx, (o, _) in enumerate(new_atom.edges)}
        new_atoms.append((new_atom, paths))
    return new_atoms, transients


def _circle_shadows(new_atom, paths):
    """Old-edge shadows of the new atom's circles.

    Returns (lower_shadows, upper_shadows): lists aligned with the canonical
    circle order, each entry (circle_index, frozenset of old edges)."""
    lows, ups = [], []
    for ci, (side, cyc) in enumerate(new_atom.circles()):
        shadow = frozenset(itertools.chain.from_iterable(paths[e] for e in cyc))
        (lows if side == "lower" else ups).append((ci, shadow))
    return lows, ups


def _atom_surgery(atom, blk, m):
    """All per-atom data: sub-level systems, interfaces, and annulus chains.

    Returns (systems, chains) where systems[k-1] is the new-atom list of
    sub-level k and chains maps each old circle / new circle handle at the
    bottom of a maximal annulus chain to the handle at its top.  Handles:
      ("oldlow", ci) / ("oldup", ci): original canonical circle index,
      ("new", k, j, ci): circle ci of the j-th new atom of sub-level k.
    """
    systems = []
    transients = {}
    up_shadow = {}
    low_shadow = {}
    for k in range(1, m + 1):
        new_atoms, trans = _sublevel_system(atom, blk, k)
        systems.append(new_atoms)
        transients[k] = set(trans)
        for j, (na, paths) in enumerate(new_atoms):
            lows, ups = _circle_shadows(na, paths)
            for ci, shadow in ups:
                up_shadow[(k, shadow)] = ("new", k, j, ci)
            for ci, shadow in lows:
                low_shadow[(k, shadow)] = ("new", k, j, ci)

    circles = atom.circles()
    oldlow = {}
    oldup = {}
    for ci, (side, cyc) in enumerate(circles):
        if side == "lower":
            oldlow[frozenset(cyc)] = ("oldlow", ci)
        else:
            oldup[frozenset(cyc)] = ("oldup", ci)

    annuli = {}
    for k in range(0, m + 1):
        for es in _interface_cycles(atom, blk, k):
            if k == 0:
                down = oldlow.get(es)
            elif (k, es) in up_shadow:
                down = up_shadow[(k, es)]
            elif es in transients[k]:
                down = ("transient", k, es)
            else:
                down = None
            if k == m:
                up = oldup.get(es)
            elif (k + 1, es) in low_shadow:
                up = low_shadow[(k + 1, es)]
            elif es in transients[k + 1]:
                up = ("transient", k + 1, es)
            else:
                up = None
            if down is None or up is None:
                raise InvariantViolation("interface curve %s unmatched at layer %d"
                                         % (sorted(es), k))
            annuli[(k, es)] = (down, up)

    chains = {}
    for (k, es), (down, up) in annuli.items():
        if down[0] == "transient":
            continue
        top = up
        while top[0] == "transient":
            _, kk, ess = top
            top = annuli[(kk, ess)][1]
        chains[down] = top
    return systems, chains


# ---------------------------------------------------------------------------
# split_level and delta
# ---------------------------------------------------------------------------

def split_level(g, level, subblocks):
    """Replace one level by consecutive sub-levels given by `subblocks`.

    `level` is 1-based; `subblocks` an ordered list of disjoint nonempty
    saddle sets partitioning that level's saddles (values increase along the
    list).  m = 1 is the identity.  The result is validated; a validation
    failure after resolution is a bug and raises InvariantViolation.
    """
    if not (1 <= level <= len(g.levels)):
        raise PerturbationError("no level %r" % (level,))
    level_saddles = set()
    for a in g.levels[level - 1]:
        level_saddles |= set(g.atoms[a].saddles)
    blocks = [frozenset(b) for b in subblocks]
    if any(not b for b in blocks):
        raise PerturbationError("empty sub-block")
    if set().union(*blocks) != level_saddles or \
            sum(len(b) for b in blocks) != len(level_saddles):
        raise PerturbationError("sub-blocks must partition the level's saddles %s"
                                % sorted(level_saddles))
    m = len(blocks)
    if m == 1:
        return g

    blk = {}
    for k, b in enumerate(blocks, start=1):
        for v in b:
            blk[v] = k

    old_level_atoms = list(g.levels[level - 1])
    surgery = {}
    for a in old_level_atoms:
        surgery[a] = _atom_surgery(g.atoms[a], blk, m)

    # keep every non-split atom, in original index order
    kept = [a for a in range(len(g.atoms)) if a not in old_level_atoms]
    new_index = {a: i for i, a in enumerate(kept)}
    atoms = [g.atoms[a] for a in kept]

    # new atoms, sub-level by sub-level, old atoms in index order
    sub_atom_index = {}
    new_levels = []
    for k in range(1, m + 1):
        lev = []
        for a in old_level_atoms:
            systems, _ = surgery[a]
            for j, (na, _) in enumerate(systems[k - 1]):
                sub_atom_index[(a, k, j)] = len(atoms)
                lev.append(len(atoms))
                atoms.append(na)
        if not lev:
            raise InvariantViolation("empty sub-level %d" % k)
        new_levels.append(tuple(lev))

    levels = ([tuple(new_index[a] for a in lv) for lv in g.levels[:level - 1]]
              + new_levels
              + [tuple(new_index[a] for a in lv) for lv in g.levels[level:]])

    def handle_ref(a, handle):
        tag = handle[0]
        if tag in ("oldlow", "oldup"):
            return None
        _, k, j, ci = handle
        return (sub_atom_index[(a, k, j)], ci)

    # where each old circle of a split atom reattaches
    reattach = {}
    new_cylinders = []
    for a in old_level_atoms:
        _, chains = surgery[a]
        for down, up in chains.items():
            if down[0] == "oldlow":
                if up[0] != "new":
                    raise InvariantViolation("chain from old lower circle ends at %r" % (up,))
                reattach[(a, down[1])] = handle_ref(a, up)
            elif up[0] == "oldup":
                if down[0] != "new":
                    raise InvariantViolation("chain to old upper circle starts at %r" % (down,))
                reattach[(a, up[1])] = handle_ref(a, down)
            else:
                lo = handle_ref(a, down)
                hi = handle_ref(a, up)
                new_cylinders.append((lo, hi))

    reattach_atoms = set(old_level_atoms)

    def map_circle(ref):
        a, ci = ref
        if a in reattach_atoms:
            return reattach[(a, ci)]
        return (new_index[a], ci)

    caps = tuple(mg.Cap(circle=map_circle(tuple(c.circle)), kind=c.kind,
                        label=c.label, marked=c.marked, fixed=c.fixed)
                 for c in g.caps)
    cylinders = tuple(sorted(
        [(map_circle(tuple(lo)), map_circle(tuple(hi))) for lo, hi in g.cylinders]
        + new_cylinders))

    out = mg.LMG(q=g.q, p=g.p, r=g.r, levels=tuple(levels), atoms=tuple(atoms),
                 caps=caps, cylinders=cylinders,
                 marked_saddles=g.marked_saddles, fixed_saddles=g.fixed_saddles)
    try:
        mg.validate(out, require_marks=False)
    except mg.LMGError as exc:
        raise InvariantViolation("resolution produced an invalid graph: %s" % exc)
    return out


def _grouped(current, target):
    """Per level of `current`, the ordered target blocks refining it."""
    return Refinement.of(current, target).per_block


def delta(g, target, chain=None):
    """The perturbed class attached to a refinement of the level partition.

    Iterates single hyperface splits (one level into two) along a maximal
    chain from the level partition of `g` down to `target`; the result is
    chain-independent.  With `chain`, an explicit list of successively finer
    partitions is followed instead of the default chain (which always splits
    off the first target sub-block of the first divisible level).
    """
    J = g.level_partition()
    if not refines_eq(target, J):
        raise PerturbationError("%s does not refine %s" % (target, J))
    if chain is not None:
        cur = g
        prev = J
        for step in list(chain) + [target]:
            if not refines_eq(step, prev):
                raise PerturbationError("chain step %s does not refine %s" % (step, prev))
            cur = _split_toward(cur, step, single=False)
            prev = step
        return cur
    cur = g
    while cur.level_partition().key() != target.key():
        cur = _split_toward(cur, target, single=True)
    return cur


def _split_toward(g, target, single):
    """One refinement step toward `target`.

    With single=True performs one hyperface split; otherwise splits every
    divisible level fully (top level first, so indices below stay valid).
    """
    J = g.level_partition()
    groups = _grouped(J, target)
    if single:
        for i, grp in enumerate(groups):
            if len(grp) > 1:
                rest = frozenset().union(*grp[1:])
                return split_level(g, i + 1, [grp[0], rest])
        return g
    cur = g
    for i in range(len(groups) - 1, -1, -1):
        if len(groups[i]) > 1:
            cur = split_level(cur, i + 1, list(groups[i]))
    return cur


def delta_direct(g, target):
    """Multi-way variant of `delta`: one split per level, no hyperface chain.

    Used as a cross-check; must agree with `delta` on canonical forms.
    """
    J = g.level_partition()
    if not refines_eq(target, J):
        raise PerturbationError("%s does not refine %s" % (target, J))
    return _split_toward(g, target, single=False)


# ---------------------------------------------------------------------------
# Merging: seeds below a class
# ---------------------------------------------------------------------------

def merge_all_levels(g, seeds=None):
    """An s = 1 graph whose perturbations reproduce `g`.

    Searches the one-level catalog with the same parameters and marking for a
    seed f and a face assignment shaped like g's level partition such that
    delta(f, .) has g's canonical form.  Unmarked saddle relabelings of the
    face are part of the search.  Pass `seeds` to reuse an already enumerated
    catalog.
    """
    if len(g.levels) == 1:
        return g
    from .complex_builder import MarkingSpec, enumerate_top_classes

    (ph, qh, rh), (ps, qs, rs) = g.marking_counts()
    marked_mins = sorted(c.label for c in g.caps if c.kind == "min" and c.marked)
    marked_maxs = sorted(c.label for c in g.caps if c.kind == "max" and c.marked)
    if (marked_mins != list(range(1, ph + 1))
            or marked_maxs != list(range(1, rh + 1))
            or sorted(g.marked_saddles) != list(range(1, qh + 1))):
        raise PerturbationError("merge requires marked labels in standard form "
                                "(initial label segments)")
    marking = MarkingSpec(marked=(ph, qh, rh), fixed=(ps, qs, rs))

    target_key = mg.canonical_form(g)
    J = g.level_partition()
    unmarked = [x for x in range(1, g.q + 1) if x not in g.marked_saddles]
    faces = []
    seen = set()
    for perm in itertools.permutations(unmarked):
        sub = dict(zip(unmarked, perm))
        sub.update({x: x for x in g.marked_saddles})
        face = J.relabel(sub)
        if face.key() not in seen:
            seen.add(face.key())
            faces.append(face)

    if seeds is None:
        seeds = enumerate_top_classes(g.p, g.q, g.r, marking)
    for seed in seeds:
        for face in faces:
            if mg.canonical_form(delta(seed, face)) == target_key:
                return seed
    raise InvariantViolation("no one-level seed reproduces the class; "
                             "downward-closure completeness violated")
