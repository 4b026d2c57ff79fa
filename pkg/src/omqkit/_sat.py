"""Model search over ground positive clauses.

A clause is ``b1 & ... & bk -> h1 | ... | hm`` over propositional atoms;
both sides may be empty.  ``search`` runs DPLL with counter-based unit
propagation.  Decisions only ever make a head atom of a clause whose body
is already true, and every atom still open when no such clause remains is
set false, so the models it returns are close to minimal.
"""

from __future__ import annotations

from .core import SizeBoundError

DEFAULT_MAX_NODES = 2_000_000


class ClauseSet:
    def __init__(self):
        self.index: dict = {}
        self.keys: list = []
        self.bodies: list = []
        self.heads: list = []
        self._occ = None

    def atom(self, key) -> int:
        i = self.index.get(key)
        if i is None:
            i = self.index[key] = len(self.keys)
            self.keys.append(key)
        return i

    def add(self, body, head) -> None:
        sb = set(body)
        if len(sb) != len(body):
            body = tuple(dict.fromkeys(body))
        if len(set(head)) != len(head):
            head = tuple(dict.fromkeys(head))
        if head and not sb.isdisjoint(head):
            return  # tautology
        self.bodies.append(body)
        self.heads.append(head)
        self._occ = None

    def __len__(self):
        return len(self.bodies)

    def occurrences(self):
        if self._occ is None:
            n = len(self.keys)
            in_body = [[] for _ in range(n)]
            in_head = [[] for _ in range(n)]
            for c, b in enumerate(self.bodies):
                for a in b:
                    in_body[a].append(c)
            for c, h in enumerate(self.heads):
                for a in h:
                    in_head[a].append(c)
            self._occ = (in_body, in_head)
        return self._occ


def search(cs: ClauseSet, false_atoms=(), max_nodes: int = DEFAULT_MAX_NODES):
    """Return the set of true atom ids of a model, or None if none exists.

    ``false_atoms`` are forced false up front.  Raises SizeBoundError after
    ``max_nodes`` decisions.
    """
    in_body, in_head = cs.occurrences()
    bodies, heads = cs.bodies, cs.heads
    n, m = len(cs.keys), len(bodies)
    val = [0] * n
    size = [len(bodies[c]) + len(heads[c]) for c in range(m)]
    nfalse = [0] * m
    nsat = [0] * m
    btrue = [0] * m
    blen = [len(b) for b in bodies]
    active = [c for c in range(m) if blen[c] == 0]
    trail: list = []
    queue: list = []

    def unit_literal(c):
        for a in bodies[c]:
            if val[a] == 0:
                return a, -1
        for a in heads[c]:
            if val[a] == 0:
                return a, 1
        return None

    def assign(a, v):
        """Set atom a; return False on conflict (assignment still recorded)."""
        val[a] = v
        trail.append(a)
        ok = True
        if v == 1:
            for c in in_head[a]:
                nsat[c] += 1
            for c in in_body[a]:
                nfalse[c] += 1
                btrue[c] += 1
                if btrue[c] == blen[c]:
                    active.append(c)
                if nsat[c] == 0 and ok:
                    k = size[c] - nfalse[c]
                    if k == 0:
                        ok = False
                    elif k == 1:
                        queue.append(unit_literal(c))
        else:
            for c in in_body[a]:
                nsat[c] += 1
            for c in in_head[a]:
                nfalse[c] += 1
                if nsat[c] == 0 and ok:
                    k = size[c] - nfalse[c]
                    if k == 0:
                        ok = False
                    elif k == 1:
                        queue.append(unit_literal(c))
        return ok

    def unassign_to(pos):
        while len(trail) > pos:
            a = trail.pop()
            v = val[a]
            val[a] = 0
            if v == 1:
                for c in in_head[a]:
                    nsat[c] -= 1
                for c in in_body[a]:
                    nfalse[c] -= 1
                    btrue[c] -= 1
            else:
                for c in in_body[a]:
                    nsat[c] -= 1
                for c in in_head[a]:
                    nfalse[c] -= 1

    def propagate():
        while queue:
            item = queue.pop()
            if item is None:
                continue
            a, v = item
            if val[a] == v:
                continue
            if val[a] == -v:
                queue.clear()
                return False
            if not assign(a, v):
                queue.clear()
                return False
        return True

    def initial_units():
        for c in range(m):
            if size[c] == 0:
                return False
            if size[c] == 1:
                queue.append(unit_literal(c))
        return True

    if not initial_units():
        return None
    for a in false_atoms:
        queue.append((a, -1))
    if not propagate():
        return None

    def pick():
        # drop entries whose body stopped being true after backtracking
        active[:] = dict.fromkeys(c for c in active if btrue[c] == blen[c])
        best, best_open = None, None
        for c in active:
            if nsat[c]:
                continue
            open_heads = size[c] - nfalse[c]
            if best is None or open_heads < best_open:
                best, best_open = c, open_heads
                if open_heads <= 2:
                    break
        if best is None:
            return None
        for a in heads[best]:
            if val[a] == 0:
                return a
        raise AssertionError("active clause without open head")

    decisions: list = []  # (atom, trail position, flipped)
    nodes = 0
    while True:
        a = pick()
        if a is None:
            return {i for i in range(n) if val[i] == 1}
        nodes += 1
        if nodes > max_nodes:
            raise SizeBoundError(f"model search exceeded {max_nodes} decisions")
        decisions.append((a, len(trail)))
        ok = assign(a, 1) and propagate()
        while not ok:
            queue.clear()
            if not decisions:
                return None
            a, pos = decisions.pop()
            unassign_to(pos)
            # the positive branch of a is exhausted; a is false from here on.
            # Attach the flip to the enclosing decision so it is undone with it.
            ok = assign(a, -1) and propagate()


def enumerate_models(cs: ClauseSet, atoms: list, limit: int):
    """Yield every subset of ``atoms`` (as a set of ids) satisfying all clauses.

    Atoms outside ``atoms`` are treated as false.  Literal enumeration over
    2^len(atoms) candidates; ``limit`` bounds that number.
    """
    if 2 ** len(atoms) > limit:
        raise SizeBoundError(f"{2 ** len(atoms)} candidate models exceed the bound {limit}")
    pos = {a: i for i, a in enumerate(atoms)}
    clauses = []
    for b, h in zip(cs.bodies, cs.heads):
        if any(a not in pos for a in b):
            continue  # body contains an always-false atom
        bm = 0
        for a in b:
            bm |= 1 << pos[a]
        hm = 0
        for a in h:
            if a in pos:
                hm |= 1 << pos[a]
        clauses.append((bm, hm))
    for mask in range(2 ** len(atoms)):
        if all((mask & bm) != bm or (mask & hm) for bm, hm in clauses):
            yield {atoms[i] for i in range(len(atoms)) if mask >> i & 1}
