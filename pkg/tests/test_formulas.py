import itertools
import random

import pytest

import helpers
import oracles
from cspbench import FiniteStructure, Signature, find_homomorphism, is_isomorphic
from cspbench.formulas import (
    FALSE,
    And,
    Atom,
    Eq,
    Exists,
    FormulaError,
    Or,
    TriviallyFalseError,
    canonical_query,
    canonical_structure,
    eliminate_disjunctions,
    evaluate,
    free_variables,
    is_locally_refutable,
    is_pp,
    local_refutation_value,
    parse_sentence,
    render,
)


def test_parse_examples():
    phi = parse_sentence("exists x y . E(x,y) & (x=y | u=v)")
    assert phi == Exists(("x", "y"), And((Atom("E", ("x", "y")),
                                          Or((Eq("x", "y"), Eq("u", "v"))))))
    assert parse_sentence("false") == FALSE
    assert parse_sentence("exists x . x = x # trailing comment") == Exists(("x",), Eq("x", "x"))


def test_parse_precedence():
    phi = parse_sentence("exists x y z . E(x,y) & E(y,z) | x = z")
    assert isinstance(phi.body, Or)
    assert isinstance(phi.body.parts[0], And)


def test_parse_rejects_universals_and_negation():
    for bad in ("forall x . E(x,x)", "exists x . not E(x,x)", "exists x . !E(x,x)",
                "exists x . ~E(x,x)", "exists . E(x,x)", "exists x , E(x,x)"):
        with pytest.raises(FormulaError):
            parse_sentence(bad)


def test_render_round_trip():
    rng = random.Random(3)
    sig = helpers.GRAPH
    for _ in range(40):
        phi = helpers.random_ep_sentence(rng, sig)
        assert parse_sentence(render(phi)) == phi
    assert render(FALSE) == "false"


def test_evaluate_trivial_examples():
    k2 = helpers.k2()
    assert evaluate(k2, parse_sentence("exists x y . E(x,y)"))
    assert not evaluate(k2, parse_sentence("exists x . E(x,x)"))
    u = helpers.u1()
    assert evaluate(u, parse_sentence("exists x y . U(x) & x = y"))


def test_evaluate_matches_brute_force():
    rng = random.Random(7)
    checked = 0
    while checked < 120:
        a = helpers.random_structure(rng, max_n=3)
        phi = helpers.random_ep_sentence(rng, a.sig, max_vars=4)
        assert evaluate(a, phi) == oracles.brute_evaluate(a, phi)
        checked += 1


def test_evaluate_pp_matches_brute_force():
    rng = random.Random(9)
    for _ in range(60):
        a = helpers.random_structure(rng, max_n=3)
        phi = helpers.random_pp_sentence(rng, a.sig)
        assert is_pp(phi)
        assert evaluate(a, phi) == oracles.brute_evaluate(a, phi)


def test_evaluate_free_variables():
    u = helpers.u1()
    phi = Atom("U", ("x",))
    assert evaluate(u, phi, {"x": 1})
    assert not evaluate(u, phi, {"x": 0})
    with pytest.raises(FormulaError):
        evaluate(u, phi)
    with pytest.raises(FormulaError):
        evaluate(u, phi, {"x": 5})


def test_evaluate_errors():
    k2 = helpers.k2()
    with pytest.raises(FormulaError):
        evaluate(k2, Atom("F", ("x", "y")), {"x": 0, "y": 0})
    with pytest.raises(FormulaError):
        evaluate(k2, Atom("E", ("x",)), {"x": 0})


def test_evaluate_with_constants():
    sig = Signature.make({"E": 2}, constants=["c"])
    a = FiniteStructure(sig, 2, {"E": [(0, 1)]}, {"c": 1})
    assert evaluate(a, parse_sentence("exists x . E(x, c)"))
    assert not evaluate(a, parse_sentence("exists x . E(c, x)"))
    assert evaluate(a, parse_sentence("exists x . x = c & x = x"))


def test_pp_sentences_transfer_to_products():
    # a pp sentence holds in a product iff it holds in both factors
    from cspbench import product

    rng = random.Random(19)
    checked = 0
    while checked < 40:
        a = helpers.random_structure(rng, max_n=3, max_rels=1)
        b = helpers.random_structure(rng, max_n=3, max_rels=1)
        if a.sig != b.sig:
            continue
        phi = helpers.random_pp_sentence(rng, a.sig)
        both = evaluate(a, phi) and evaluate(b, phi)
        assert both == evaluate(product(a, b), phi)
        checked += 1


def test_canonical_query_single_edge():
    e = helpers.graph(2, [(0, 1)])
    assert render(canonical_query(e)) == "exists x0 x1 . E(x0, x1)"


def test_canonical_query_isolated_element():
    s = FiniteStructure(helpers.GRAPH, 1, {"E": []})
    assert render(canonical_query(s)) == "exists x0 . x0 = x0"


def test_canonical_query_decides_hom():
    rng = random.Random(21)
    pairs = 0
    while pairs < 30:
        a = helpers.random_structure(rng, max_n=3)
        b = helpers.random_structure(rng, max_n=3)
        if a.sig != b.sig:
            continue
        assert evaluate(b, canonical_query(a)) == (find_homomorphism(a, b) is not None)
        pairs += 1


def test_canonical_query_constants():
    sig = Signature.make({"E": 2}, constants=["c"])
    a = FiniteStructure(sig, 2, {"E": [(0, 1)]}, {"c": 0})
    b_good = FiniteStructure(sig, 2, {"E": [(0, 1)]}, {"c": 0})
    b_bad = FiniteStructure(sig, 2, {"E": [(0, 1)]}, {"c": 1})
    assert evaluate(b_good, canonical_query(a))
    assert not evaluate(b_bad, canonical_query(a))


def test_canonical_structure_examples():
    sig = helpers.GRAPH
    db, elem = canonical_structure(parse_sentence("exists x y . E(x,y) & x = y"), sig)
    assert db.n == 1 and db.rel["E"] == frozenset({(0, 0)})
    db2, elem2 = canonical_structure(parse_sentence("exists x y z . E(x,y) & E(y,z)"), sig)
    assert db2.n == 3 and len(db2.rel["E"]) == 2
    assert elem2["x"] != elem2["z"]


def test_canonical_structure_round_trip():
    rng = random.Random(23)
    count = 0
    while count < 20:
        a = helpers.random_structure(rng, max_n=3)
        # loop-free in the general sense: skip structures with repeated
        # entries in some tuple, which the canonical query cannot separate
        if any(len(set(t)) < len(t) for r, _ in a.sig.relations for t in a.rel[r]):
            continue
        db, _ = canonical_structure(canonical_query(a), a.sig)
        assert is_isomorphic(db, a)
        count += 1


def test_canonical_structure_rejects_falsum_and_or():
    with pytest.raises(TriviallyFalseError):
        canonical_structure(FALSE, helpers.GRAPH)
    with pytest.raises(FormulaError):
        canonical_structure(parse_sentence("exists x y . E(x,y) | x = y"), helpers.GRAPH)


def test_local_refutation_value_examples():
    empty = FiniteStructure(helpers.GRAPH, 2, {"E": []})
    assert not local_refutation_value(empty, parse_sentence("exists x y . E(x,y)"))
    k3 = helpers.k3()
    phi = parse_sentence("exists x . E(x,x)")
    assert local_refutation_value(k3, phi) and not evaluate(k3, phi)
    assert local_refutation_value(empty, parse_sentence("exists x . x = x"))


def test_ep_truth_implies_emptiness_value():
    rng = random.Random(29)
    for _ in range(60):
        a = helpers.random_structure(rng, max_n=3)
        phi = helpers.random_ep_sentence(rng, a.sig, max_vars=4)
        if evaluate(a, phi):
            assert local_refutation_value(a, phi)


def test_is_locally_refutable_examples():
    full_u = FiniteStructure(Signature.make({"U": 1}), 2, {"U": [(0,), (1,)]})
    verdict, cert = is_locally_refutable(full_u)
    assert verdict and cert == 0

    verdict, cert = is_locally_refutable(helpers.k3())
    assert not verdict
    assert render(cert) == "exists x0 . E(x0, x0)"
    assert local_refutation_value(helpers.k3(), cert) and not evaluate(helpers.k3(), cert)

    all_empty = FiniteStructure(Signature.make({"E": 2, "U": 1}), 3, {})
    verdict, cert = is_locally_refutable(all_empty)
    assert verdict and cert == 0


def test_is_locally_refutable_agrees_with_sentence_oracle():
    # every ep sentence with a true emptiness value must hold; probe with
    # random sentences on random structures
    rng = random.Random(31)
    for _ in range(25):
        a = helpers.random_structure(rng, max_n=3)
        verdict, _ = is_locally_refutable(a)
        if not verdict:
            continue
        for _ in range(20):
            phi = helpers.random_ep_sentence(rng, a.sig, max_vars=3)
            if local_refutation_value(a, phi):
                assert evaluate(a, phi)


def test_is_locally_refutable_constants():
    sig = Signature.make({"U": 1}, constants=["c"])
    good = FiniteStructure(sig, 2, {"U": [(0,), (1,)]}, {"c": 0})
    assert is_locally_refutable(good)[0]
    # the diagonal element must equal the constant by default
    u_only_1 = FiniteStructure(sig, 2, {"U": [(1,)]}, {"c": 0})
    assert not is_locally_refutable(u_only_1)[0]
    assert is_locally_refutable(u_only_1, include_constants=False)[0]


def test_eliminate_disjunctions_noop_on_pp():
    t = helpers.p4_structure(extra={"E": (2, {(0, 1), (1, 0)})})
    phi = parse_sentence("exists x y . E(x,y) & x = x")
    assert eliminate_disjunctions(phi, "P4", template=t) == phi


def test_eliminate_disjunctions_requires_correct_p4():
    bad = FiniteStructure(Signature.make({"P4": 4}), 2, {"P4": [(0, 0, 0, 0)]})
    with pytest.raises(FormulaError):
        eliminate_disjunctions(parse_sentence("exists x . x = x | false"), "P4", template=bad)


def test_eliminate_disjunctions_basic_equivalence():
    phi = parse_sentence("exists x y u v . (x = y | u = v)")
    # all 2-element structures interpreting P4 correctly, with an extra
    # binary relation ranging over all 16 possibilities
    pairs = list(itertools.product(range(2), repeat=2))
    for extra in range(16):
        e_tuples = {pairs[i] for i in range(4) if extra >> i & 1}
        t = helpers.p4_structure(extra={"E": (2, e_tuples)})
        out = eliminate_disjunctions(phi, "P4", template=t)
        assert is_pp(out)
        assert evaluate(t, out) == evaluate(t, phi)


def test_eliminate_disjunctions_random_equivalence():
    rng = random.Random(37)
    cases = 0
    while cases < 40:
        n = rng.randint(1, 3)
        extra_arity = rng.randint(1, 2)
        tuples = {t for t in itertools.product(range(n), repeat=extra_arity)
                  if rng.random() < 0.6}
        t = helpers.p4_structure(n=n, extra={"E": (extra_arity, tuples)})
        phi = helpers.random_ep_sentence(rng, t.sig, max_vars=5, max_disjunctions=2)
        out = eliminate_disjunctions(phi, "P4", template=t)
        assert is_pp(out)
        assert evaluate(t, out) == evaluate(t, phi)
        cases += 1


def test_eliminate_disjunctions_drops_dead_branches():
    t = helpers.p4_structure(extra={"E": (2, set())})
    phi = parse_sentence("exists x y . E(x,y) | x = y")
    out = eliminate_disjunctions(phi, "P4", template=t)
    assert is_pp(out) and evaluate(t, out) == evaluate(t, phi) is True
    all_dead = parse_sentence("exists x y . E(x,y) | false")
    assert eliminate_disjunctions(all_dead, "P4", template=t) == FALSE


def test_free_variables_ignores_constants():
    sig = Signature.make({"E": 2}, constants=["c"])
    phi = parse_sentence("exists x . E(x, c) & y = c")
    assert free_variables(phi, sig) == {"y"}
