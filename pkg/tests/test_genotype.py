import itertools
from collections import Counter
from math import comb

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eqdisco.genotype import (
    EquationModel,
    StructuralRules,
    Term,
    VocabularyExhausted,
    canonical_signature,
    enumerate_vocabulary,
    generate_term,
    group_families,
    strip_common_factor,
    token_from_name,
)

NAMES = ["u", "du/dx", "d^2u/dx^2", "d^3u/dx^3", "du/dt", "d^2u/dt^2", "forcing"]
TOK = {n: token_from_name(n) for n in NAMES}


def toks(*names):
    return [TOK[n] for n in names]


def test_token_families():
    assert TOK["u"].family == "field"
    assert TOK["forcing"].family == "forcing"
    assert TOK["d^3u/dx^3"].parameters == (3, 0)
    assert TOK["d^2u/dt^2"].time_order == 2
    with pytest.raises(ValueError):
        token_from_name("u*u")


def test_signature_examples():
    assert canonical_signature(toks("u", "du/dx")) == "du/dx*u"
    assert canonical_signature(toks("du/dx", "u")) == "du/dx*u"
    assert canonical_signature(toks("du/dt")) == "du/dt"
    with pytest.raises(ValueError):
        canonical_signature(toks("u", "u", "u"), max_factors=2)
    with pytest.raises(ValueError):
        canonical_signature([])


def test_two_token_multisets():
    pool = toks("u", "du/dx", "du/dt")
    sigs = {canonical_signature(p) for p in itertools.product(pool, repeat=2)}
    assert len(sigs) == 6


multisets = st.lists(st.sampled_from(NAMES), min_size=1, max_size=4)


@given(multisets, multisets)
def test_signature_congruence(a, b):
    same = canonical_signature(toks(*a)) == canonical_signature(toks(*b))
    assert same == (Counter(a) == Counter(b))


@given(multisets, st.randoms())
def test_signature_permutation_invariant(a, rnd):
    b = list(a)
    rnd.shuffle(b)
    assert canonical_signature(toks(*a)) == canonical_signature(toks(*b))


def test_vocabulary_examples():
    none = StructuralRules.none()
    assert enumerate_vocabulary(toks("u", "du/dx"), 1, none).signatures == ["du/dx", "u"]
    v2 = enumerate_vocabulary(toks("u", "du/dx"), 2, none).signatures
    assert sorted(v2) == sorted(["u", "du/dx", "u*u", "du/dx*u", "du/dx*du/dx"])
    burgers = enumerate_vocabulary(toks("u", "du/dx", "d^2u/dx^2", "du/dt"), 2)
    assert "du/dt*du/dt" not in burgers
    assert "du/dt*u" in burgers
    # 4 singles + 10 pairs, minus the doubled time derivative
    assert len(burgers) == 13


@given(st.lists(st.sampled_from(NAMES), min_size=1, max_size=6, unique=True), st.integers(1, 3))
def test_vocabulary_size_matches_multiset_count(names, t_max):
    vocab = enumerate_vocabulary(toks(*names), t_max, StructuralRules.none())
    sigs = vocab.signatures
    n = len(names)
    assert len(sigs) == sum(comb(n + k - 1, k) for k in range(1, t_max + 1))
    assert sigs == sorted(set(sigs))


def test_generate_single_token_deterministic(rng):
    fams = group_families(toks("u"))
    for _ in range(20):
        assert generate_term(rng, 1, fams).signature == "u"


def test_generate_family_proportional():
    fams = group_families(toks("u", "du/dx", "d^2u/dx^2", "d^3u/dx^3", "du/dt"))
    assert {k: len(v) for k, v in fams.items()} == {"derivatives": 4, "field": 1}
    rng = np.random.default_rng(7)
    n = 100_000
    hits = sum(generate_term(rng, 1, fams).signature != "u" for _ in range(n))
    assert abs(hits / n - 0.8) < 0.01


def test_generate_exhaustion(rng):
    fams = group_families(toks("u", "du/dx"))
    full = enumerate_vocabulary(toks("u", "du/dx"), 2).signatures
    with pytest.raises(VocabularyExhausted):
        generate_term(rng, 2, fams, existing=full)


@given(st.integers(0, 2**32), st.integers(1, 3), st.lists(st.sampled_from(NAMES[:5]), max_size=6))
def test_generate_respects_bounds(seed, t_max, existing):
    fams = group_families(toks(*NAMES))
    rng = np.random.default_rng(seed)
    existing = set(existing)
    term = generate_term(rng, t_max, fams, existing)
    assert 1 <= len(term) <= t_max
    assert term.signature not in existing
    assert StructuralRules().admits(term.tokens)


def test_structural_rules():
    rules = StructuralRules()
    assert not rules.admits(toks("du/dt", "d^2u/dt^2"))
    assert not rules.admits(toks("forcing", "forcing"))
    assert rules.admits(toks("forcing", "u"))
    terms = [Term.of(toks("u")), Term.of(toks("du/dx"))]
    assert rules.admits_model(terms)
    assert not rules.admits_model(terms[:1])
    assert not rules.admits_model([terms[0], terms[0]])


def test_strip_common_factor():
    a = Term.of(toks("u", "d^2u/dt^2"))
    b = Term.of(toks("d^2u/dx^2", "u"))
    reduced = strip_common_factor([a, b])
    assert [t.signature for t in reduced] == ["d^2u/dt^2", "d^2u/dx^2"]
    assert strip_common_factor([Term.of(toks("u")), Term.of(toks("u", "du/dx"))]) is None
    assert strip_common_factor([Term.of(toks("u")), Term.of(toks("du/dx"))]) is None
    squared = strip_common_factor([Term.of(toks("u", "u")), Term.of(toks("u", "du/dx"))])
    assert [t.signature for t in squared] == ["u", "du/dx"]


def test_model_render():
    m = EquationModel([Term.of(toks("du/dt")), Term.of(toks("u", "du/dx"))], [-1.0, -0.5])
    assert m.render() == "-1.0*du/dt + -0.5*du/dx*u = 0"
    assert m.coefficient_map() == {"du/dt": -1.0, "du/dx*u": -0.5}
