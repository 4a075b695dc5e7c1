"""The finite Inv-Pol Galois connection.

pp_closure computes the least pp-definable relation containing a given
relation r via the indicator construction: with t = |r| tuples, the i-th
column of r's tuple list is an element of power(a, t), and the closure is
the set of images of those columns under all homomorphisms
power(a, t) -> a.  Membership of a candidate image tuple is decided by a
pinned homomorphism search, so closures never require materializing the
full (possibly enormous) polymorphism set.

Certificates are two-sided: a pp formula that re-evaluates to exactly r,
or a t-ary polymorphism mapping r's tuple rows to a tuple outside r.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

from .structures import (
    BudgetExceededError,
    DEFAULT_BUDGET,
    FiniteStructure,
    find_homomorphism,
    power,
)
from .formulas import And, Atom, Eq, Exists, FALSE, _numbered_names, conj, evaluate, free_variables
from .clones import OperationTable, operation_preserves

# Indicator powers: t tuples mean a power with |A|**t elements.  These caps
# keep the construction at desk scale (2**8 = 256, 3**5 = 243).
MAX_POWER_DOMAIN = 260


class EmptyRelationClosure(UserWarning):
    """Closure of the empty relation is the empty relation by convention."""


@dataclass(frozen=True)
class Relation:
    """An m-ary relation over the domain of an associated structure."""

    arity: int
    tuples: frozenset

    def __post_init__(self):
        object.__setattr__(self, "tuples", frozenset(tuple(t) for t in self.tuples))
        for t in self.tuples:
            if len(t) != self.arity:
                raise ValueError(f"tuple {t} does not have arity {self.arity}")

    @staticmethod
    def make(arity, tuples) -> "Relation":
        return Relation(arity, frozenset(tuple(t) for t in tuples))

    def check_domain(self, a: FiniteStructure):
        for t in self.tuples:
            if not all(isinstance(v, int) and 0 <= v < a.n for v in t):
                raise ValueError(f"tuple {t} outside domain of size {a.n}")


@dataclass
class PpDefinabilityCertificate:
    """Either a defining pp formula or a violating polymorphism.

    For a negative answer, applying the operation column-wise to
    input_rows (the tuples of r) yields violating_tuple, which is outside
    r even though every row is inside.
    """

    definable: bool
    formula: object | None = None
    violating_operation: OperationTable | None = None
    input_rows: tuple | None = None
    violating_tuple: tuple | None = None

    def verify(self, a: FiniteStructure, r: Relation) -> bool:
        if self.definable:
            return relation_of_formula(a, self.formula, r.arity) == r.tuples
        f = self.violating_operation
        if f is None or self.violating_tuple in r.tuples:
            return False
        if any(row not in r.tuples for row in self.input_rows):
            return False
        image = tuple(
            f.apply(tuple(row[p] for row in self.input_rows)) for p in range(r.arity)
        )
        return image == self.violating_tuple and operation_preserves(f, a)


def relation_of_formula(a: FiniteStructure, phi, arity: int, var_order=None) -> frozenset:
    """Extension of a formula over a; free variables are taken in var_order,
    defaulting to length-then-lexicographic order (so x2 precedes x10)."""
    if var_order is None:
        var_order = sorted(free_variables(phi, a.sig), key=lambda v: (len(v), v))
    if len(var_order) > arity:
        raise ValueError(f"formula has {len(var_order)} free variables, expected <= {arity}")
    out = set()
    for values in itertools.product(range(a.n), repeat=arity):
        if evaluate(a, phi, dict(zip(var_order, values))):
            out.add(values)
    return frozenset(out)


def _check_budget(a: FiniteStructure, t: int):
    if a.n ** t > MAX_POWER_DOMAIN:
        raise BudgetExceededError(
            f"indicator power {a.n}**{t} exceeds the configured cap of {MAX_POWER_DOMAIN}")


def _closure_search(a: FiniteStructure, r: Relation, budget: int):
    """Yield (image_tuple, homomorphism) for every tuple in the closure."""
    rows = sorted(r.tuples)
    t = len(rows)
    _check_budget(a, t)
    pw = power(a, t, budget=budget)
    columns = [
        # the i-th column of the tuple list, as an element of power(a, t)
        sum(row[i] * a.n ** (t - 1 - j) for j, row in enumerate(rows))
        for i in range(r.arity)
    ]
    for image in itertools.product(range(a.n), repeat=r.arity):
        pinned = {}
        ok = True
        for col, val in zip(columns, image):
            if pinned.setdefault(col, val) != val:
                ok = False
                break
        if not ok:
            continue
        h = find_homomorphism(pw, a, pinned=pinned, budget=budget)
        if h is not None:
            yield image, h


def pp_closure(a: FiniteStructure, r: Relation, budget: int = DEFAULT_BUDGET) -> Relation:
    """Smallest pp-definable relation of a containing r.

    The closure of the empty relation is empty (pp-definable by false);
    callers who care can catch the EmptyRelationClosure warning.
    """
    r.check_domain(a)
    if not r.tuples:
        warnings.warn("closure of the empty relation is empty by convention",
                      EmptyRelationClosure, stacklevel=2)
        return Relation(r.arity, frozenset())
    return Relation(r.arity, frozenset(image for image, _ in _closure_search(a, r, budget)))


def is_pp_definable(a: FiniteStructure, r: Relation, budget: int = DEFAULT_BUDGET):
    """Decide pp-definability of r in a; returns (verdict, certificate)."""
    r.check_domain(a)
    if not r.tuples:
        return True, PpDefinabilityCertificate(True, formula=FALSE)
    rows = tuple(sorted(r.tuples))
    for image, h in _closure_search(a, r, budget):
        if image not in r.tuples:
            f = OperationTable(a.n, len(rows), h.map)
            return False, PpDefinabilityCertificate(
                False, violating_operation=f, input_rows=rows, violating_tuple=image)
    return True, PpDefinabilityCertificate(True, formula=synthesize_pp_definition(a, r, budget))


def synthesize_pp_definition(a: FiniteStructure, r: Relation,
                             budget: int = DEFAULT_BUDGET, simplify: bool = False):
    """A pp formula whose extension over a is exactly r.

    The formula is the canonical query of power(a, t) with the column
    positions of r left free: element variables are all existentially
    quantified, and fresh free variables y_i are pinned to the column
    elements by equalities.  The postcondition (extension == r) is verified
    by re-evaluation before returning.  Raises ValueError when r is not
    pp-definable.
    """
    r.check_domain(a)
    if not r.tuples:
        return FALSE
    rows = sorted(r.tuples)
    t = len(rows)
    _check_budget(a, t)
    pw = power(a, t, budget=budget)

    outer = _numbered_names(r.arity, a.sig.constants)
    inner_avoid = set(a.sig.constants) | set(outer)
    inner = tuple(f"_e{i}" for i in range(pw.n))
    assert not inner_avoid.intersection(inner)

    atoms = []
    for rname, _ in pw.sig.relations:
        for tup in sorted(pw.rel[rname]):
            atoms.append(Atom(rname, tuple(inner[e] for e in tup)))
    for cname in pw.sig.constants:
        atoms.append(Eq(inner[pw.const[cname]], cname))
    columns = [
        sum(row[i] * a.n ** (t - 1 - j) for j, row in enumerate(rows))
        for i in range(r.arity)
    ]
    for y, col in zip(outer, columns):
        atoms.append(Eq(y, inner[col]))
    phi = Exists(inner, conj(atoms))

    if simplify:
        phi = _simplify(a, phi, r, budget)
    extension = relation_of_formula(a, phi, r.arity)
    if extension != r.tuples:
        raise ValueError("relation is not pp-definable; synthesize_pp_definition "
                         "requires is_pp_definable(a, r) to hold")
    return phi


def _simplify(a: FiniteStructure, phi, r: Relation, budget: int):
    """Drop duplicate atoms and quantified variables that occur nowhere;
    never changes the extension (verified by the caller's re-evaluation)."""
    assert isinstance(phi, Exists)
    body = phi.body.parts if isinstance(phi.body, And) else (phi.body,)
    seen, atoms = set(), []
    for atom in body:
        if atom not in seen:
            seen.add(atom)
            atoms.append(atom)
    used = set()
    for atom in atoms:
        used |= {x for x in (atom.args if isinstance(atom, Atom) else (atom.left, atom.right))}
    kept = tuple(v for v in phi.vars if v in used)
    if not atoms:
        atoms = [Eq(phi.vars[0], phi.vars[0])]
        kept = (phi.vars[0],)
    return Exists(kept, conj(atoms)) if kept else conj(atoms)


def pp_type_leq(a: FiniteStructure, s: tuple, t: tuple, budget: int = DEFAULT_BUDGET) -> bool:
    """Containment of pp-types of tuples: every pp formula satisfied by s is
    satisfied by t.  On a finite structure this holds iff a homomorphism of
    pointed structures (a, s) -> (a, t) exists."""
    if len(s) != len(t):
        raise ValueError("tuples must have equal length")
    pinned = {}
    for x, y in zip(s, t):
        if pinned.setdefault(x, y) != y:
            return False
    return find_homomorphism(a, a, pinned=pinned, budget=budget) is not None


@dataclass
class PpTypeReport:
    """Equivalence classes of n-tuples under mutual pp-type containment,
    with the subset maximal in the containment preorder."""

    arity: int
    classes: list
    maximal: list
    count: int = field(init=False)

    def __post_init__(self):
        self.count = len(self.maximal)


def count_maximal_pp_types(a: FiniteStructure, n: int, budget: int = DEFAULT_BUDGET) -> PpTypeReport:
    """Quotient all n-tuples by mutual pp-type containment and count the
    classes that no other class strictly dominates."""
    if n < 1:
        raise ValueError("type arity must be >= 1")
    if a.n ** n > MAX_POWER_DOMAIN:
        raise BudgetExceededError(f"{a.n}**{n} tuples exceed the configured cap")
    tuples = list(itertools.product(range(a.n), repeat=n))
    leq = {}
    for s in tuples:
        for t in tuples:
            leq[s, t] = pp_type_leq(a, s, t, budget=budget)

    classes = []
    assigned = {}
    for s in tuples:
        for idx, cls in enumerate(classes):
            rep = cls[0]
            if leq[s, rep] and leq[rep, s]:
                cls.append(s)
                assigned[s] = idx
                break
        else:
            assigned[s] = len(classes)
            classes.append([s])

    maximal = []
    for idx, cls in enumerate(classes):
        rep = cls[0]
        dominated = any(
            leq[rep, other[0]] and not leq[other[0], rep]
            for j, other in enumerate(classes) if j != idx
        )
        if not dominated:
            maximal.append(idx)
    return PpTypeReport(n, classes, maximal)


@dataclass
class OmegaCategoricityReport:
    """Maximal pp-type counts for n = 1..n_max.

    A finite template always has an omega-categorical equivalent, so the
    verdict field is constant; the counts are the data of interest.
    """

    n_max: int
    counts: list
    verdict: str = "yes (finite)"


def omega_categoricity_report(a: FiniteStructure, n_max: int,
                              budget: int = DEFAULT_BUDGET) -> OmegaCategoricityReport:
    counts = [count_maximal_pp_types(a, n, budget=budget).count for n in range(1, n_max + 1)]
    return OmegaCategoricityReport(n_max, counts)
