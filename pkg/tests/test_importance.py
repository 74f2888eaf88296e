import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eqdisco.genotype import SearchSpace, TermVocabulary, Term, group_families, token_from_name
from eqdisco.importance import (
    REGIMES,
    CountTable,
    EmptySupportError,
    ImportanceTable,
    build_distribution,
    estimate_counts,
    load_distribution,
    sample_term,
    save_distribution,
)

AB = CountTable({"A": 8.0, "B": 2.0})


def test_regime_examples():
    assert build_distribution(AB, "uniform").probs == {"A": 0.5, "B": 0.5}
    fixed = build_distribution(AB, "fixed").probs
    assert fixed == pytest.approx({"A": 0.8, "B": 0.2}, abs=1e-15)
    biased = build_distribution(AB, "biased", {"A"}).probs
    assert biased["A"] == pytest.approx(9.6 / 11.6, abs=1e-12)
    assert biased["B"] == pytest.approx(2 / 11.6, abs=1e-12)
    high = build_distribution(AB, "highly_biased", {"A"}).probs
    assert high["A"] == pytest.approx(16 / 18, abs=1e-12)
    assert high["B"] == pytest.approx(2 / 18, abs=1e-12)


def test_build_errors():
    with pytest.raises(ValueError):
        build_distribution(AB, "biased", set())
    with pytest.raises(ValueError):
        build_distribution(AB, "biased", {"C"})
    with pytest.raises(ValueError):
        build_distribution(CountTable({"A": 0.0}), "fixed")
    with pytest.raises(ValueError):
        build_distribution(AB, "mild")


count_tables = st.dictionaries(
    st.sampled_from(["u", "du/dx", "du/dx*u", "du/dt", "du/dt*u", "d^2u/dx^2", "u*u"]),
    st.floats(0.0, 1e6, allow_nan=False),
    min_size=2,
).filter(lambda d: sum(d.values()) > 0)


@settings(max_examples=300)
@given(count_tables, st.sampled_from(REGIMES), st.data())
def test_tables_sum_to_one(counts, regime, data):
    boost = data.draw(st.sets(st.sampled_from(sorted(counts)), min_size=1))
    table = build_distribution(CountTable(counts), regime, boost)
    assert abs(sum(table.probs.values()) - 1.0) < 1e-12
    assert abs(sum(table.token_marginal.values()) - 1.0) < 1e-12
    assert all(p >= 0 for p in table.probs.values())


# counts are draw tallies, so integers keep the ratios within float resolution
draw_tallies = st.dictionaries(
    st.sampled_from(["u", "du/dx", "du/dx*u", "du/dt", "du/dt*u", "d^2u/dx^2", "u*u"]),
    st.integers(1, 10**6).map(float),
    min_size=2,
)


@given(draw_tallies, st.data())
def test_biasing_monotone(counts, data):
    keys = sorted(counts)
    boost = data.draw(st.sets(st.sampled_from(keys), min_size=1, max_size=len(keys) - 1))
    fixed = build_distribution(CountTable(counts), "fixed").probs
    for regime in ("biased", "highly_biased"):
        probs = build_distribution(CountTable(counts), regime, boost).probs
        for s in keys:
            assert (probs[s] > fixed[s]) if s in boost else (probs[s] < fixed[s])


def test_token_marginal():
    t = ImportanceTable({"u": 0.5, "du/dx*u": 0.5})
    # u appears in both terms, du/dx in one: raw 1.0 and 0.5
    assert t.token_marginal == pytest.approx({"u": 2 / 3, "du/dx": 1 / 3})
    assert t.max_token_importance(["du/dx", "u"]) == pytest.approx(2 / 3)


def test_single_term_vocabulary_counts(rng):
    tok = token_from_name("u")
    vocab = TermVocabulary((Term.of([tok]),))
    counts = estimate_counts(3, 50, rng, vocab, group_families([tok]), max_factors=1)
    assert counts.fractions() == {"u": 1.0}


def test_field_fraction_proportional():
    space = SearchSpace.from_names(["u", "du/dx", "d^2u/dx^2", "d^3u/dx^3", "du/dt"], t_max=1)
    counts = estimate_counts(10, 10_000, np.random.default_rng(3), space.vocabulary, space.families, 1)
    assert abs(counts.fractions()["u"] - 0.2) < 0.01


def test_count_determinism():
    space = SearchSpace.from_names(["u", "du/dx", "du/dt"], t_max=2)
    a = estimate_counts(2, 500, np.random.default_rng(9), space.vocabulary, space.families, 2)
    b = estimate_counts(2, 500, np.random.default_rng(9), space.vocabulary, space.families, 2)
    assert a == b


def test_sample_examples(rng):
    assert {sample_term(ImportanceTable({"A": 1.0}), rng) for _ in range(50)} == {"A"}
    half = ImportanceTable({"A": 0.5, "B": 0.5})
    assert {sample_term(half, rng, {"A"}) for _ in range(50)} == {"B"}
    with pytest.raises(EmptySupportError):
        sample_term(half, rng, {"A", "B"})
    with pytest.raises(EmptySupportError):
        sample_term(ImportanceTable({"A": 1.0, "B": 0.0}), rng, {"A"})
    assert sample_term(ImportanceTable({"A": 1.0, "B": 0.0}), rng, {"A"}, uniform_fallback=True) == "B"


def test_sample_frequency():
    rng = np.random.default_rng(11)
    table = ImportanceTable({"A": 0.8, "B": 0.2})
    n = 100_000
    freq = sum(sample_term(table, rng) == "A" for _ in range(n)) / n
    assert abs(freq - 0.8) < 0.01


def test_sample_chi_square():
    probs = {"a": 0.05, "b": 0.1, "c": 0.15, "d": 0.3, "e": 0.4}
    table = ImportanceTable(probs)
    rng = np.random.default_rng(2024)
    n = 100_000
    draws = [sample_term(table, rng) for _ in range(n)]
    observed = np.array([draws.count(s) for s in probs])
    expected = np.array(list(probs.values())) * n
    chi2 = float(((observed - expected) ** 2 / expected).sum())
    # 0.999 quantile of chi-square with 4 degrees of freedom
    assert chi2 < 18.467


def test_distribution_file_round_trip(tmp_path):
    table = build_distribution(AB, "biased", {"A"})
    save_distribution(table, tmp_path / "d.json")
    assert load_distribution(tmp_path / "d.json").probs == table.probs


def test_partial_table_completion():
    t = ImportanceTable.from_probs({"A": 0.7}, ["A", "B", "C"])
    assert t.probs == pytest.approx({"A": 0.7, "B": 0.15, "C": 0.15})
    with pytest.raises(ValueError):
        ImportanceTable.from_probs({"Z": 1.0}, ["A"])
    with pytest.raises(ValueError):
        ImportanceTable({"A": 0.7})
