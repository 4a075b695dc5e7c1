"""Finite relational structures with constants.

Elements of an n-element structure are the dense integers 0..n-1; relation
tuples are fixed-length integer tuples.  Products, powers and one-tolerant
powers encode element tuples in row-major order: the k-tuple
(t_0, ..., t_{k-1}) over a domain of size n is the element

    t_0 * n**(k-1) + t_1 * n**(k-2) + ... + t_{k-1}

so that ``power(a, k)`` coincides with the k-fold iterated binary product
and every certificate derived from a power is reproducible bit for bit.

Homomorphism search is backtracking over source elements in ascending
order, trying target values in ascending order, with forward checking on
relation tuples.  The first map found is therefore the lexicographically
least homomorphism, and enumeration yields maps in lexicographic order.
Every search counts candidate value assignments against a budget
(default 5_000_000) and raises BudgetExceededError beyond it.

Structure file format (JSON, strict -- unknown fields are rejected)::

    {
      "signature": {"relations": {"E": 2}, "constants": ["c0"]},
      "domain": 2,
      "relations": {"E": [[0, 1], [1, 0]]},
      "constants": {"c0": 0}
    }

"domain" is the number n of elements; every relation listed in the
signature must appear under "relations" (possibly with an empty tuple
list) and every constant under "constants".
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

DEFAULT_BUDGET = 5_000_000

# Exhaustive relabelling is used for isomorphism tests; beyond this many
# elements the factorial blowup is no longer desk scale.
_MAX_ISO_DOMAIN = 8


class BudgetExceededError(RuntimeError):
    """A search or construction exceeded its candidate-assignment budget."""


class SignatureMismatchError(ValueError):
    """Two structures that must share a signature do not."""


@dataclass(frozen=True)
class Signature:
    """Relation symbols with arities, plus constant symbols.

    Stored sorted by name so that equal signatures compare equal regardless
    of construction order.
    """

    relations: tuple[tuple[str, int], ...]
    constants: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "relations", tuple(sorted(self.relations)))
        object.__setattr__(self, "constants", tuple(sorted(self.constants)))
        names = [r for r, _ in self.relations] + list(self.constants)
        if len(set(names)) != len(names):
            raise ValueError("symbol names must be unique across relations and constants")
        for r, ar in self.relations:
            if not isinstance(ar, int) or ar < 1:
                raise ValueError(f"relation {r!r} must have arity >= 1, got {ar!r}")

    @staticmethod
    def make(relations=None, constants=()) -> "Signature":
        return Signature(tuple((relations or {}).items()), tuple(constants))

    def arity(self, name: str) -> int:
        for r, ar in self.relations:
            if r == name:
                return ar
        raise KeyError(f"unknown relation symbol {name!r}")

    @property
    def relation_names(self):
        return tuple(r for r, _ in self.relations)

    def relational_part(self) -> "Signature":
        return Signature(self.relations, ())


class FiniteStructure:
    """A finite relational structure over a Signature.

    Treated as immutable after construction; all operations in this package
    return new structures.  Equality and hashing ignore the optional name.
    """

    __slots__ = ("sig", "n", "rel", "const", "name", "_canon")

    def __init__(self, sig: Signature, n: int, relations=None, constants=None, name=None):
        if not isinstance(n, int) or n < 1:
            raise ValueError(f"domain size must be a positive integer, got {n!r}")
        relations = dict(relations or {})
        constants = dict(constants or {})
        rel = {}
        for rname, ar in sig.relations:
            tuples = frozenset(tuple(t) for t in relations.pop(rname, ()))
            for t in tuples:
                if len(t) != ar:
                    raise ValueError(f"tuple {t} has wrong length for {rname} (arity {ar})")
                if not all(isinstance(v, int) and 0 <= v < n for v in t):
                    raise ValueError(f"tuple {t} of {rname} out of domain 0..{n - 1}")
            rel[rname] = tuples
        if relations:
            raise ValueError(f"relations not in signature: {sorted(relations)}")
        const = {}
        for cname in sig.constants:
            if cname not in constants:
                raise ValueError(f"missing interpretation for constant {cname!r}")
            v = constants.pop(cname)
            if not isinstance(v, int) or not 0 <= v < n:
                raise ValueError(f"constant {cname!r} value {v!r} out of domain")
            const[cname] = v
        if constants:
            raise ValueError(f"constants not in signature: {sorted(constants)}")
        self.sig = sig
        self.n = n
        self.rel = rel
        self.const = const
        self.name = name
        self._canon = None

    def tuples(self, rname: str) -> frozenset:
        return self.rel[rname]

    def total_tuples(self) -> int:
        return sum(len(ts) for ts in self.rel.values())

    def key(self):
        return (
            self.sig,
            self.n,
            tuple((r, tuple(sorted(self.rel[r]))) for r, _ in self.sig.relations),
            tuple(sorted(self.const.items())),
        )

    def __eq__(self, other):
        return isinstance(other, FiniteStructure) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        label = self.name or "structure"
        return f"<{label}: n={self.n}, {self.total_tuples()} tuples>"

    def with_name(self, name: str) -> "FiniteStructure":
        return FiniteStructure(self.sig, self.n, self.rel, self.const, name)

    def relational_reduct(self) -> "FiniteStructure":
        return FiniteStructure(self.sig.relational_part(), self.n, self.rel, {}, self.name)

    # -- JSON structure file format (shared; owned here) --

    def to_json_dict(self) -> dict:
        return {
            "signature": {
                "relations": {r: ar for r, ar in self.sig.relations},
                "constants": list(self.sig.constants),
            },
            "domain": self.n,
            "relations": {r: sorted(list(t) for t in self.rel[r]) for r, _ in self.sig.relations},
            "constants": dict(sorted(self.const.items())),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)

    @staticmethod
    def from_json_dict(doc: dict, name=None) -> "FiniteStructure":
        if not isinstance(doc, dict):
            raise ValueError("structure document must be a JSON object")
        extra = set(doc) - {"signature", "domain", "relations", "constants"}
        if extra:
            raise ValueError(f"unknown fields in structure document: {sorted(extra)}")
        for field in ("signature", "domain", "relations", "constants"):
            if field not in doc:
                raise ValueError(f"structure document missing field {field!r}")
        sig_doc = doc["signature"]
        if not isinstance(sig_doc, dict) or set(sig_doc) != {"relations", "constants"}:
            raise ValueError('"signature" must be an object with exactly "relations" and "constants"')
        sig = Signature.make(sig_doc["relations"], sig_doc["constants"])
        return FiniteStructure(sig, doc["domain"], doc["relations"], doc["constants"], name)

    @staticmethod
    def from_json(text: str, name=None) -> "FiniteStructure":
        return FiniteStructure.from_json_dict(json.loads(text), name)


@dataclass(frozen=True)
class Homomorphism:
    """A verified-checkable map between structures with equal signature."""

    source: FiniteStructure
    target: FiniteStructure
    map: tuple[int, ...]

    def __call__(self, x: int) -> int:
        return self.map[x]

    def verify(self) -> bool:
        """Exhaustively check preservation of every tuple and constant."""
        a, b, h = self.source, self.target, self.map
        if a.sig != b.sig or len(h) != a.n:
            return False
        if not all(0 <= v < b.n for v in h):
            return False
        for rname, _ in a.sig.relations:
            bt = b.rel[rname]
            for t in a.rel[rname]:
                if tuple(h[x] for x in t) not in bt:
                    return False
        return all(h[a.const[c]] == b.const[c] for c in a.const)


def encode_tuple(t, n: int) -> int:
    """Row-major encoding of a tuple over domain 0..n-1."""
    idx = 0
    for v in t:
        idx = idx * n + v
    return idx


def decode_index(idx: int, n: int, k: int) -> tuple:
    out = []
    for _ in range(k):
        idx, v = divmod(idx, n)
        out.append(v)
    return tuple(reversed(out))


def product(a: FiniteStructure, b: FiniteStructure, budget: int = DEFAULT_BUDGET) -> FiniteStructure:
    """Direct (categorical) product; pair (i, j) is element i*|B| + j."""
    if a.sig != b.sig:
        raise SignatureMismatchError("product requires equal signatures")
    rels = {}
    for rname, ar in a.sig.relations:
        if len(a.rel[rname]) * len(b.rel[rname]) > budget:
            raise BudgetExceededError(f"product relation {rname} exceeds budget")
        out = set()
        for ta in a.rel[rname]:
            for tb in b.rel[rname]:
                out.add(tuple(ta[p] * b.n + tb[p] for p in range(ar)))
        rels[rname] = out
    consts = {c: a.const[c] * b.n + b.const[c] for c in a.const}
    return FiniteStructure(a.sig, a.n * b.n, rels, consts)


def power(a: FiniteStructure, k: int, budget: int = DEFAULT_BUDGET) -> FiniteStructure:
    """k-fold power with row-major tuple encoding; power(a, 1) equals a."""
    if not isinstance(k, int) or k < 1:
        raise ValueError("power exponent must be a positive integer")
    if a.n ** k > budget:
        raise BudgetExceededError(f"power domain size {a.n}^{k} exceeds budget {budget}")
    rels = {}
    for rname, ar in a.sig.relations:
        base = sorted(a.rel[rname])
        if len(base) ** k > budget:
            raise BudgetExceededError(f"power relation {rname} exceeds budget")
        out = set()
        for rows in itertools.product(base, repeat=k):
            out.add(tuple(encode_tuple(tuple(rows[j][p] for j in range(k)), a.n) for p in range(ar)))
        rels[rname] = out
    consts = {c: encode_tuple((v,) * k, a.n) for c, v in a.const.items()}
    return FiniteStructure(a.sig, a.n ** k, rels, consts)


def one_tolerant_power(a: FiniteStructure, k: int, budget: int = DEFAULT_BUDGET) -> FiniteStructure:
    """k-th power where a relation tuple may fail in at most one coordinate.

    A tuple of encoded elements is in R iff its coordinate projections lie
    in R^a for at least k-1 of the k coordinates.  Constants (when present)
    are interpreted as diagonal tuples, matching power().
    """
    if not isinstance(k, int) or k < 3:
        raise ValueError("one-tolerant power requires exponent >= 3")
    if a.n ** k > budget:
        raise BudgetExceededError(f"one-tolerant power domain size {a.n}^{k} exceeds budget")
    rels = {}
    for rname, ar in a.sig.relations:
        base = sorted(a.rel[rname])
        work = len(base) ** k + k * (len(base) ** (k - 1)) * (a.n ** ar)
        if work > budget:
            raise BudgetExceededError(f"one-tolerant power relation {rname} exceeds budget")
        out = set()

        def add(rows):
            out.add(tuple(encode_tuple(tuple(rows[j][p] for j in range(k)), a.n) for p in range(ar)))

        for rows in itertools.product(base, repeat=k):
            add(rows)
        for j in range(k):
            for ok_rows in itertools.product(base, repeat=k - 1):
                for free_row in itertools.product(range(a.n), repeat=ar):
                    add(ok_rows[:j] + (free_row,) + ok_rows[j:])
        rels[rname] = out
    consts = {c: encode_tuple((v,) * k, a.n) for c, v in a.const.items()}
    return FiniteStructure(a.sig, a.n ** k, rels, consts)


def _hom_maps(a, b, pinned, budget, first_only):
    """Backtracking search for homomorphism maps a -> b, ascending order.

    pinned maps source elements to forced target values (constants are
    pinned automatically).  Returns a list of map tuples in lexicographic
    order; with first_only, at most one.
    """
    if a.sig != b.sig:
        raise SignatureMismatchError("homomorphism search requires equal signatures")
    pin = {}
    for c, va in a.const.items():
        if pin.setdefault(va, b.const[c]) != b.const[c]:
            return []
    for x, v in (pinned or {}).items():
        if not (0 <= x < a.n and 0 <= v < b.n):
            raise ValueError(f"pin {x}->{v} out of range")
        if pin.setdefault(x, v) != v:
            return []
    # Tuples become fully checkable once their max element is assigned;
    # before that, partially assigned tuples must extend to some b-tuple.
    full = [[] for _ in range(a.n)]
    partial = [[] for _ in range(a.n)]
    for rname, _ in a.sig.relations:
        bt = b.rel[rname]
        if a.rel[rname] and not bt:
            return []
        btl = sorted(bt)
        for t in a.rel[rname]:
            m = max(t)
            full[m].append((bt, t))
            for x in set(t):
                if x < m:
                    positions = tuple(p for p in range(len(t)) if t[p] <= x)
                    partial[x].append((btl, t, positions))

    h = [-1] * a.n
    out = []
    steps = 0

    def consistent(x):
        for bt, t in full[x]:
            if tuple(h[e] for e in t) not in bt:
                return False
        for btl, t, positions in partial[x]:
            if not any(all(cand[p] == h[t[p]] for p in positions) for cand in btl):
                return False
        return True

    def extend(x):
        nonlocal steps
        if x == a.n:
            out.append(tuple(h))
            return first_only
        values = (pin[x],) if x in pin else range(b.n)
        for v in values:
            steps += 1
            if steps > budget:
                raise BudgetExceededError(
                    f"homomorphism search exceeded budget of {budget} candidate assignments")
            h[x] = v
            if consistent(x) and extend(x + 1):
                return True
        h[x] = -1
        return False

    extend(0)
    return out


def find_homomorphism(a, b, pinned=None, budget: int = DEFAULT_BUDGET):
    """Lexicographically least homomorphism a -> b, or None."""
    maps = _hom_maps(a, b, pinned, budget, first_only=True)
    return Homomorphism(a, b, maps[0]) if maps else None


def enumerate_homomorphisms(a, b, pinned=None, budget: int = DEFAULT_BUDGET):
    """All homomorphisms a -> b in lexicographic (canonical) order."""
    return [Homomorphism(a, b, m) for m in _hom_maps(a, b, pinned, budget, first_only=False)]


def direct_limit(chain, homs) -> FiniteStructure:
    """Direct limit of a finite chain a_0 -> a_1 -> ... -> a_last.

    The quotient construction identifies x in a_i with y in a_j whenever
    their images agree in some later chain member.  For a finite chain the
    result is isomorphic to the last structure; the quotient is still
    computed explicitly so that the construction is checkable.
    """
    chain = list(chain)
    homs = list(homs)
    if not chain:
        raise ValueError("direct limit of an empty chain")
    if len(homs) != len(chain) - 1:
        raise ValueError("need exactly one homomorphism per consecutive pair")
    for i, h in enumerate(homs):
        if h.source != chain[i] or h.target != chain[i + 1]:
            raise ValueError(f"chain does not compose at position {i}")
        if not h.verify():
            raise ValueError(f"map at position {i} is not a homomorphism")

    parent = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(x, y):
        rx, ry = find(x), find(y)
        if rx != ry:
            if ry < rx:
                rx, ry = ry, rx
            parent[ry] = rx

    for i, s in enumerate(chain):
        for x in range(s.n):
            parent[(i, x)] = (i, x)
    for i, h in enumerate(homs):
        for x in range(chain[i].n):
            union((i, x), (i + 1, h.map[x]))

    reps = sorted({find(node) for node in parent})
    index = {rep: i for i, rep in enumerate(reps)}

    def cls(i, x):
        return index[find((i, x))]

    sig = chain[0].sig
    rels = {rname: set() for rname, _ in sig.relations}
    for i, s in enumerate(chain):
        for rname, _ in sig.relations:
            for t in s.rel[rname]:
                rels[rname].add(tuple(cls(i, x) for x in t))
    consts = {c: cls(0, chain[0].const[c]) for c in chain[0].const}
    return FiniteStructure(sig, len(reps), rels, consts)


def canonical_form(a: FiniteStructure):
    """Canonical key under exhaustive relabelling; equal iff isomorphic.

    Each relation is condensed to a bitmask over row-major tuple indices,
    minimized over all permutations of the domain.
    """
    if a._canon is not None:
        return a._canon
    if a.n > _MAX_ISO_DOMAIN:
        raise BudgetExceededError(f"canonical form by relabelling is limited to n <= {_MAX_ISO_DOMAIN}")
    n = a.n
    rel_tuples = [tuple(a.rel[r]) for r, _ in a.sig.relations]
    const_elems = tuple(a.const[c] for c in a.sig.constants)
    best = None
    for perm in itertools.permutations(range(n)):
        key = []
        for tuples in rel_tuples:
            mask = 0
            for t in tuples:
                idx = 0
                for v in t:
                    idx = idx * n + perm[v]
                mask |= 1 << idx
            key.append(mask)
        key.append(tuple(perm[v] for v in const_elems))
        key = tuple(key)
        if best is None or key < best:
            best = key
    a._canon = (a.sig, a.n, best)
    return a._canon


def is_isomorphic(a: FiniteStructure, b: FiniteStructure) -> bool:
    if a.sig != b.sig or a.n != b.n:
        return False
    if any(len(a.rel[r]) != len(b.rel[r]) for r, _ in a.sig.relations):
        return False
    return canonical_form(a) == canonical_form(b)
