import pytest

from graphfuse.frontend import (
    SpecError, parse_spec_file, parse_term, pretty, pretty_spec,
)
from graphfuse.terms import (
    Builtin, PathRed, Paths, PFn, VertexRed, alpha_equivalent,
)


def parse_one(text):
    defs = parse_spec_file(text)
    return next(iter(defs.values()))


def test_parse_sssp():
    d = parse_one("SSSP(s)(v) = min {p in Paths(s, v)} weight(p)\n")
    assert d.params == ("s",) and d.map_var == "v"
    assert d.term == PathRed(Builtin("min"), PFn("weight"), Paths("s", "v"))


def test_parse_cc():
    d = parse_one("CC(v) = min {p in Paths(v)} head(p)\n")
    assert d.params == () and d.map_var == "v"
    assert d.term == PathRed(Builtin("min"), PFn("head"), Paths(None, "v"))


def test_unknown_path_function():
    with pytest.raises(SpecError) as exc:
        parse_spec_file("BAD(v) = min {p in Paths(v)} frobnicate(p)\n")
    assert "unknown path function" in str(exc.value)


def test_unknown_reduction():
    with pytest.raises(SpecError):
        parse_spec_file("BAD(v) = frobnicate {p in Paths(v)} weight(p)\n")


def test_map_valued_rejected():
    with pytest.raises(SpecError) as exc:
        parse_spec_file("NPH(s)(v) = sum {p in Paths(s, v)} length(p) -> 1\n")
    assert "map-valued reduction unsupported" in str(exc.value)


def test_diagnostic_has_position():
    with pytest.raises(SpecError) as exc:
        parse_spec_file("BAD(v) = min {p in Paths(v)} frobnicate(p)\n", "f.grafs")
    e = exc.value
    assert str(e).startswith("f.grafs:")
    assert e.line == 1 and e.col > 1


def test_corpus_parses_fully(corpus):
    assert len(corpus) >= 25
    expected = {
        "SSSP", "NP", "LP", "SL", "LL", "WP", "NRP", "FR", "CC", "CCS", "BR",
        "BFS", "WSP", "NSP", "HLP", "HLL", "SWSL", "WSLSW", "LNP", "CCSS",
        "NWSP", "NSWSL", "NWR", "LSD", "SP2", "SPR", "Ecc", "WPG", "LNPG",
        "NCC", "FRA", "RFA", "DS", "SCC", "Radius", "Diam", "DRR", "RDS",
    }
    assert set(corpus) == expected


def test_rejected_corpus():
    import importlib.resources as res

    text = (res.files("graphfuse") / "corpus" / "rejected.grafs").read_text()
    with pytest.raises(SpecError) as exc:
        parse_spec_file(text)
    assert "map-valued reduction unsupported" in str(exc.value)


def test_roundtrip_all_corpus(corpus):
    for name, d in corpus.items():
        text = pretty(d.term)
        again = parse_term(text)
        assert alpha_equivalent(d.term, again), f"{name} failed round-trip"


def test_roundtrip_fused_terms(corpus):
    from graphfuse.fusion import fuse

    for name in ("Radius", "SSSP", "DS"):
        d = corpus[name]
        plan = fuse(d.term, d.params, d.map_var, name)
        for r in plan.rounds:
            text = pretty(r.as_term())
            again = parse_term(text)
            assert alpha_equivalent(r.as_term(), again), f"{name}: {text}"


def test_cross_reference_resolution(corpus):
    # RDS inlines both SSSP/WP and the closed Radius term
    rds = corpus["RDS"].term
    assert corpus["RDS"].params == ("s",)
    from graphfuse.terms import MScalar, Node

    found = []

    def walk(t):
        if isinstance(t, MScalar):
            found.append(t)
        for c in t.children():
            walk(c)

    walk(rds)
    assert found, "nested closed reduction expected after inlining"


def test_unknown_reference():
    with pytest.raises(SpecError) as exc:
        parse_spec_file("A(v) = min {p in Paths(v)} head(p)\nB(s) = min {v in V} Missing(s, v)\n")
    assert "Missing" in str(exc.value) or "unknown" in str(exc.value).lower()


def test_duplicate_spec():
    with pytest.raises(SpecError):
        parse_spec_file("A(v) = min {p in Paths(v)} head(p)\nA(v) = min {p in Paths(v)} head(p)\n")


def test_pretty_spec_header(corpus):
    s = pretty_spec(corpus["SSSP"])
    assert s.startswith("SSSP(s)(v) = ")
