import pytest
from hypothesis import given, settings, strategies as hs

from tilespec import parse_rule_file, serialize, shipped_rule_path, shipped_rules, validate
from tilespec.errors import (
    DuplicateDefinition,
    RuleSemanticError,
    RuleSyntaxError,
    UnknownSymbol,
)
from tilespec.rulespec import is_edge_connected, is_simply_connected, load_rule

from conftest import FIB, make_rule, symbolic


def test_parse_fibonacci():
    r = parse_rule_file(FIB)
    assert (r.name, r.kind, r.dim) == ("fib", "symbolic", 1)
    assert r.alphabet.symbols == ("a", "b")
    assert r.images == ((0, 1), (0,))


def test_parse_identity():
    r = make_rule("rule id", "kind symbolic", "dim 1", "alphabet a", "map a -> a")
    assert r.images == ((0,),)
    assert validate(r).ok


def test_block_rows_are_bottom_up(rules):
    r = rules["tm2d"]
    assert r.payload.size == (2, 2)
    # symbol 0: bottom row "0 1", top row "1 0"; stored x-fastest from y = 0
    assert r.payload.blocks[0] == (0, 1, 1, 0)
    assert r.payload.blocks[1] == (1, 0, 0, 1)


def test_block_cell_count_matches_size(rules):
    for name, r in rules.items():
        if r.kind == "block":
            K = 1
            for l in r.payload.size:
                K *= l
            assert all(len(b) == K for b in r.payload.blocks), name


def test_comments_and_whitespace_ignored():
    r = parse_rule_file("# header comment\n" + FIB.replace("map a -> a b", "map   a ->  a   b   # trailing"))
    assert r == parse_rule_file(FIB)


def test_tokens_are_case_sensitive_multichar():
    r = make_rule("rule t", "kind symbolic", "dim 1", "alphabet A a aa", "map A -> a aa", "map a -> A", "map aa -> A a")
    assert r.alphabet.symbols == ("A", "a", "aa")
    assert r.images[0] == (1, 2)


@pytest.mark.parametrize("name", shipped_rules())
def test_round_trip_is_idempotent(name):
    text = open(shipped_rule_path(name), encoding="utf-8").read()
    r = parse_rule_file(text)
    canon = serialize(r)
    assert parse_rule_file(canon) == r
    assert serialize(parse_rule_file(canon)) == canon


@pytest.mark.parametrize("name", shipped_rules())
def test_shipped_rules_validate(name):
    assert validate(load_rule(shipped_rule_path(name))).ok


_letters = "abcd"


@hs.composite
def symbolic_rules(draw):
    m = draw(hs.integers(1, 4))
    alphabet = list(_letters[:m])
    maps = {s: draw(hs.lists(hs.sampled_from(alphabet), min_size=1, max_size=5)) for s in alphabet}
    return symbolic("r", maps, alphabet)


@settings(max_examples=60, deadline=None)
@given(symbolic_rules())
def test_round_trip_property(r):
    assert parse_rule_file(serialize(r)) == r


# ---------------------------------------------------------------- errors


def test_syntax_error_location():
    with pytest.raises(RuleSyntaxError) as ei:
        parse_rule_file("rule x\nkind symbolic\ndim 1\nalphabet a\nmap a => a\n")
    e = ei.value
    assert (e.line, e.col) == (5, 7)
    assert e.expected == "'->'"
    assert e.exit_code == 2


def test_bad_kind_is_syntax_error():
    with pytest.raises(RuleSyntaxError) as ei:
        parse_rule_file("rule x\nkind weird\ndim 1\nalphabet a\n")
    assert ei.value.line == 2


def test_unknown_symbol():
    with pytest.raises(UnknownSymbol) as ei:
        parse_rule_file(FIB.replace("map b -> a", "map b -> c"))
    assert ei.value.token == "c"
    assert ei.value.exit_code == 3


def test_duplicate_definition():
    with pytest.raises(DuplicateDefinition) as ei:
        parse_rule_file(FIB + "map a -> b\n")
    assert ei.value.token == "a"


def test_duplicate_alphabet_token():
    with pytest.raises(DuplicateDefinition):
        parse_rule_file("rule x\nkind symbolic\ndim 1\nalphabet a a\nmap a -> a\n")


def test_missing_map_is_semantic():
    with pytest.raises(RuleSemanticError):
        parse_rule_file("rule x\nkind symbolic\ndim 1\nalphabet a b\nmap a -> a b\n")


def test_symbolic_requires_dim_one():
    with pytest.raises(RuleSemanticError):
        parse_rule_file(FIB.replace("dim 1", "dim 2"))


def test_block_row_width_checked():
    with pytest.raises(RuleSyntaxError):
        make_rule("rule b", "kind block", "dim 2", "alphabet 0 1", "size 2 2", "block 0 :", "0 1 1", "1 0",
                  "block 1 :", "1 0", "0 1")


# ---------------------------------------------------------------- validation


def _fusion(*body, dim=1, alphabet="a b"):
    return make_rule("rule f", "kind fusion", f"dim {dim}", f"alphabet {alphabet}", *body)


def test_overlapping_placement():
    r = _fusion("level 1", "super A :", "place a at 0", "place b at 0")
    rep = validate(r)
    assert not rep.ok
    assert "OverlappingPlacement" in rep.codes()


def test_overlap_detected_geometrically():
    # level-1 tile A has two cells, so the level-2 slot at offset 1 collides
    r = _fusion("level 1", "super A :", "place a at 0", "place b at 1", "super B :", "place a at 0",
                "level 2", "super X :", "place A at 0", "place B at 1")
    assert "OverlappingPlacement" in validate(r).codes()


def test_disconnected_support():
    r = _fusion("level 1", "super A :", "place a at 0", "place b at 2")
    assert "DisconnectedSupport" in validate(r).codes()


def test_unknown_constituent():
    r = _fusion("level 1", "super A :", "place a at 0", "level 2", "super B :", "place a at 0")
    assert "UnknownConstituent" in validate(r).codes()


def test_chacon_validates(rules):
    rep = validate(rules["chacon"])
    assert rep.ok and not rep.issues


def test_ring_is_connected_but_not_a_disk():
    ring = [f"place a at {x} {y}" for x in range(3) for y in range(3) if (x, y) != (1, 1)]
    r = _fusion("level 1", "super R :", *ring, dim=2, alphabet="a")
    rep = validate(r)
    assert rep.ok
    assert [i.code for i in rep.warnings] == ["NotADisk"]


def test_sadic_alphabet_mismatch():
    r = make_rule("rule s", "kind sadic", "dim 1", "alphabet a b",
                  "sub s0 :", "map x -> a b", "sub s1 :", "map a -> a", "directive s0 s1")
    rep = validate(r)
    assert "AlphabetMismatch" in rep.codes()


def test_sadic_chain_ok(rules):
    assert validate(rules["fib_abb"]).ok


def test_block_size_too_small():
    r = make_rule("rule b", "kind block", "dim 1", "alphabet a", "size 1", "block a :", "a")
    assert "SizeTooSmall" in validate(r).codes()


def test_check_lengths_mismatch():
    r = make_rule("rule i", "kind inflation", "dim 1", "alphabet a b", "map a -> a b", "map b -> a",
                  "lengths a=1.5 b=1", "check-lengths")
    assert "LengthMismatch" in validate(r).codes()


def test_check_lengths_consistent(rules):
    assert validate(rules["fib_tiles"]).ok


def test_vector_fusion_singular():
    r = make_rule("rule v", "kind vector-fusion", "dim 2", "alphabet A B", "L 1 1 1 1", "k0 1 0", "l0 0 1", "seeds A B")
    assert "SingularMatrix" in validate(r).codes()


def test_report_ok_iff_no_errors(rules):
    for r in rules.values():
        rep = validate(r)
        assert rep.ok == (not rep.errors)


def test_connectivity_helpers():
    assert is_edge_connected({(0, 0), (0, 1), (1, 1)})
    assert not is_edge_connected({(0, 0), (1, 1)})
    assert is_simply_connected({(0, 0), (1, 0)})
    assert not is_simply_connected({(x, y) for x in range(3) for y in range(3)} - {(1, 1)})
