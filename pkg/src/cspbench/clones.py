"""Finite-arity polymorphisms, operation predicates, and cores.

A k-ary operation on domain 0..n-1 is a flat value table of length n**k in
row-major order, so the table of a k-ary polymorphism is literally the map
array of a homomorphism from power(a, k) to a under the shared tuple
encoding.  Enumeration therefore runs the backtracking homomorphism search
over the value table with incremental constraint checks instead of
filtering all n**(n**k) tables; results come out in canonical
(lexicographic) order.

Operation table serialization (JSON)::

    {"domain": n, "arity": k, "values": [v_0, ..., v_{n**k - 1}]}
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

from .structures import (
    DEFAULT_BUDGET,
    FiniteStructure,
    Homomorphism,
    encode_tuple,
    enumerate_homomorphisms,
    power,
)


@dataclass(frozen=True)
class OperationTable:
    """An explicit k-ary operation f: {0..n-1}^k -> {0..n-1}."""

    n: int
    k: int
    values: tuple[int, ...]

    def __post_init__(self):
        if self.n < 1 or self.k < 1:
            raise ValueError("operation table needs n >= 1 and k >= 1")
        if len(self.values) != self.n ** self.k:
            raise ValueError(f"value table must have length {self.n ** self.k}")
        if not all(isinstance(v, int) and 0 <= v < self.n for v in self.values):
            raise ValueError("table values must lie in the domain")

    def apply(self, args) -> int:
        return self.values[encode_tuple(args, self.n)]

    def to_json_dict(self) -> dict:
        return {"domain": self.n, "arity": self.k, "values": list(self.values)}

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @staticmethod
    def from_json_dict(doc: dict) -> "OperationTable":
        if set(doc) != {"domain", "arity", "values"}:
            raise ValueError("operation table document needs exactly domain, arity, values")
        return OperationTable(doc["domain"], doc["arity"], tuple(doc["values"]))

    @staticmethod
    def from_homomorphism(h: Homomorphism) -> "OperationTable":
        """Read a homomorphism power(a, k) -> a as a k-ary operation table."""
        a = h.target
        return OperationTable(a.n, _log_base(len(h.map), a.n), h.map)

    @staticmethod
    def projection(n: int, k: int, coord: int) -> "OperationTable":
        values = tuple(t[coord] for t in itertools.product(range(n), repeat=k))
        return OperationTable(n, k, values)

    @staticmethod
    def from_function(n: int, k: int, fn) -> "OperationTable":
        values = tuple(fn(*t) for t in itertools.product(range(n), repeat=k))
        return OperationTable(n, k, values)


def _log_base(size: int, n: int) -> int:
    k = 0
    while n ** k < size:
        k += 1
    if n ** k != size:
        raise ValueError(f"table length {size} is not a power of {n}")
    return k


@dataclass(frozen=True)
class EssentialityWitness:
    """Witness that an operation depends on two disjoint coordinate sets.

    Evaluating the operation on base[X := sub] and base[X := sub2] gives
    different values, and likewise for the Y triple.
    """

    x_coords: tuple[int, ...]
    y_coords: tuple[int, ...]
    x_base: tuple[int, ...]
    x_sub: tuple[int, ...]
    x_sub2: tuple[int, ...]
    y_base: tuple[int, ...]
    y_sub: tuple[int, ...]
    y_sub2: tuple[int, ...]

    def verify(self, f: OperationTable) -> bool:
        if not self.x_coords or not self.y_coords:
            return False
        if set(self.x_coords) & set(self.y_coords):
            return False

        def subst(base, coords, repl):
            t = list(base)
            for c in coords:
                t[c] = repl[c]
            return tuple(t)

        x_ok = f.apply(subst(self.x_base, self.x_coords, self.x_sub)) != \
            f.apply(subst(self.x_base, self.x_coords, self.x_sub2))
        y_ok = f.apply(subst(self.y_base, self.y_coords, self.y_sub)) != \
            f.apply(subst(self.y_base, self.y_coords, self.y_sub2))
        return x_ok and y_ok


def operation_preserves(f: OperationTable, a: FiniteStructure) -> bool:
    """Exhaustive check that f is a polymorphism of a."""
    if f.n != a.n:
        return False
    for rname, ar in a.sig.relations:
        rows = sorted(a.rel[rname])
        for choice in itertools.product(rows, repeat=f.k):
            image = tuple(f.apply(tuple(choice[j][p] for j in range(f.k))) for p in range(ar))
            if image not in a.rel[rname]:
                return False
    return all(f.apply((v,) * f.k) == v for v in a.const.values())


def preserves_relation(f: OperationTable, tuples, arity: int) -> bool:
    """Does f preserve the given set of tuples, applied column-wise?"""
    rows = sorted(tuples)
    tset = set(rows)
    for choice in itertools.product(rows, repeat=f.k):
        image = tuple(f.apply(tuple(choice[j][p] for j in range(f.k))) for p in range(arity))
        if image not in tset:
            return False
    return True


def enumerate_polymorphisms(a: FiniteStructure, k: int, budget: int = DEFAULT_BUDGET):
    """All k-ary polymorphisms of a, i.e. Hom(power(a, k), a), in canonical order."""
    pw = power(a, k, budget=budget)
    return [OperationTable(a.n, k, h.map) for h in enumerate_homomorphisms(pw, a, budget=budget)]


def _essential_coordinates(f: OperationTable):
    """Coordinates i such that changing only argument i can change the value,
    with a witness pair of argument tuples for each."""
    witnesses = {}
    for i in range(f.k):
        found = None
        for t in itertools.product(range(f.n), repeat=f.k):
            base = f.apply(t)
            for v in range(f.n):
                if v == t[i]:
                    continue
                s = t[:i] + (v,) + t[i + 1:]
                if f.apply(s) != base:
                    found = (t, s)
                    break
            if found:
                break
        if found:
            witnesses[i] = found
    return witnesses


def is_essentially_unary(f: OperationTable):
    """Decide whether f(x) = g(x_beta) for some coordinate beta and unary g.

    Returns (True, (beta, g_values)) or (False, EssentialityWitness); the
    witness consists of two singleton coordinate sets with their two
    substitution triples.
    """
    essential = _essential_coordinates(f)
    if len(essential) <= 1:
        beta = next(iter(essential), 0)
        g = tuple(f.apply((d,) * f.k) for d in range(f.n))
        return True, (beta, g)
    (i, (ti, si)), (j, (tj, sj)) = sorted(essential.items())[:2]
    witness = EssentialityWitness(
        x_coords=(i,), y_coords=(j,),
        x_base=ti, x_sub=ti, x_sub2=si,
        y_base=tj, y_sub=tj, y_sub2=sj,
    )
    assert witness.verify(f)
    return False, witness


def operation_predicates(f: OperationTable) -> dict:
    """Flags: idempotent, conservative, projection."""
    idempotent = all(f.apply((d,) * f.k) == d for d in range(f.n))
    conservative = all(
        f.apply(t) in set(t) for t in itertools.product(range(f.n), repeat=f.k)
    )
    projection = any(
        f == OperationTable.projection(f.n, f.k, i) for i in range(f.k)
    )
    return {"idempotent": idempotent, "conservative": conservative, "projection": projection}


@dataclass
class EssentialUnarityVerdict:
    """Arity-bounded verdict: finite enumeration cannot certify the
    property for all (in particular infinitary) polymorphisms."""

    all_essentially_unary: bool
    max_arity: int
    checked_counts: dict
    counterexample: OperationTable | None = None
    witness: EssentialityWitness | None = None


def all_polymorphisms_essentially_unary(a: FiniteStructure, max_arity: int,
                                        budget: int = DEFAULT_BUDGET) -> EssentialUnarityVerdict:
    """Check every polymorphism of arity 2..max_arity for essential unarity."""
    if max_arity < 2:
        raise ValueError("max_arity must be at least 2")
    counts = {}
    for k in range(1, max_arity + 1):
        polys = enumerate_polymorphisms(a, k, budget=budget)
        counts[k] = len(polys)
        if k == 1:
            continue  # unary operations are essentially unary by definition
        for f in polys:
            ok, info = is_essentially_unary(f)
            if not ok:
                return EssentialUnarityVerdict(False, max_arity, counts, f, info)
    return EssentialUnarityVerdict(True, max_arity, counts)


def _is_embedding(h: Homomorphism) -> bool:
    a = h.source
    if len(set(h.map)) != a.n:
        return False
    for rname, ar in a.sig.relations:
        rel = a.rel[rname]
        for t in itertools.product(range(a.n), repeat=ar):
            if t not in rel and tuple(h.map[x] for x in t) in rel:
                return False
    return True


def is_core(a: FiniteStructure, budget: int = DEFAULT_BUDGET):
    """True iff every endomorphism is an embedding (injective and reflecting
    every relation); returns (verdict, certificate) where the certificate is
    a non-embedding endomorphism when the verdict is false."""
    for h in enumerate_homomorphisms(a, a, budget=budget):
        if not _is_embedding(h):
            return False, h
    return True, None


def is_epc_finite(a: FiniteStructure, budget: int = DEFAULT_BUDGET) -> bool:
    """Existential positive closedness for a finite structure.

    For finite structures this coincides with being a core: endomorphisms
    automatically preserve every pp-definable relation, so expanding the
    structure by all pp-definable relations leaves the endomorphism set
    unchanged, and the epc criterion collapses to the core property.
    """
    return is_core(a, budget=budget)[0]
