from datetime import date, datetime, timezone

import pytest

from adharvest.html_model import parse_html
from adharvest.rule_engine import (
    BinaryExpr,
    DuplicateCategory,
    DuplicateField,
    ElemExpr,
    EvalError,
    IndexExpr,
    PatExpr,
    RuleSyntaxError,
    ShapeMismatch,
    eval_expr,
    extract_records,
    nsl_to_advert,
    parse_rules,
)

from oracles import pat_spans

TODAY = date(2006, 3, 7)
SEEN = datetime(2006, 3, 7, 9, 30, tzinfo=timezone.utc)

RULE_TEXT = """
# comment line
category vehicles.cars {
  date_format: "dd/MM/yyyy"
  list: elem(table) contain pat("{today}")
  title = pcdata()[0]
  price = pat("Rs [0-9,]+")
  date = pat("{today}")
  contacts = pat("[0-9]{3}-[0-9]{4}")
}
"""


def page_of(source):
    return parse_html(source, "http://t/")


# --- parsing -----------------------------------------------------------------


def test_parse_golden_ast():
    rules = parse_rules(RULE_TEXT)
    assert rules.names() == ["vehicles.cars"]
    rule = rules.categories[0]
    assert rule.date_format == "dd/MM/yyyy"
    assert isinstance(rule.list_expr, BinaryExpr)
    assert rule.list_expr.op == "contain"
    assert isinstance(rule.list_expr.left, ElemExpr) and rule.list_expr.left.name == "table"
    assert isinstance(rule.list_expr.right, PatExpr)
    assert rule.field_names() == ["title", "price", "date", "contacts"]
    title_expr = dict(rule.fields)["title"]
    assert isinstance(title_expr, IndexExpr) and title_expr.index == 0


def test_parse_empty_input():
    assert parse_rules("").categories == ()
    assert parse_rules("# only a comment\n").categories == ()


def test_parse_unclosed_paren_is_syntax_error():
    text = 'category a.b {\n  date_format: "dd/MM/yyyy"\n  list: elem(\n  f = pcdata()\n}'
    with pytest.raises(RuleSyntaxError) as err:
        parse_rules(text)
    assert err.value.line == 4  # the token after the unclosed parenthesis


def test_parse_reports_line_and_column():
    with pytest.raises(RuleSyntaxError) as err:
        parse_rules("category a.b !oops")
    assert err.value.line == 1 and err.value.col == 14


def test_duplicate_category_rejected():
    block = 'category a { date_format: "dd/MM/yyyy" list: pcdata() f = pcdata() }'
    with pytest.raises(DuplicateCategory):
        parse_rules(block + "\n" + block)


def test_duplicate_field_rejected():
    text = 'category a { date_format: "dd/MM/yyyy" list: pcdata() f = pcdata() f = pcdata() }'
    with pytest.raises(DuplicateField):
        parse_rules(text)


def test_operators_left_associative():
    text = 'category a { date_format: "d" list: pcdata() f = elem(a) + elem(b) - elem(c) }'
    # date_format is only validated at evaluation time
    rules = parse_rules(text)
    expr = dict(rules.categories[0].fields)["f"]
    assert expr.op == "-" and expr.left.op == "+"


def test_indexing_binds_tightest():
    text = 'category a { date_format: "d" list: pcdata() f = elem(a) before elem(b)[1] }'
    expr = dict(parse_rules(text).categories[0].fields)["f"]
    assert expr.op == "before"
    assert isinstance(expr.right, IndexExpr)


def test_string_escapes():
    text = 'category a { date_format: "d" list: pcdata() f = pat("a\\"b\\\\c") }'
    expr = dict(parse_rules(text).categories[0].fields)["f"]
    assert expr.pattern == 'a"b\\c'


# --- evaluation ---------------------------------------------------------------


def expr_of(source: str):
    text = f'category x {{ date_format: "dd/MM/yyyy" list: pcdata() f = {source} }}'
    return dict(parse_rules(text).categories[0].fields)["f"]


def test_eval_pcdata_index():
    page = page_of("<p>a</p><p>b</p>")
    result = eval_expr(expr_of("pcdata()[0]"), page, TODAY)
    assert [page.source[p.start : p.end] for p in result.pieces] == ["a"]


def test_eval_annihilation():
    page = page_of("<li>a</li>")
    assert len(eval_expr(expr_of("elem(li) - elem(li)"), page, TODAY)) == 0


def test_eval_today_substitution():
    page = page_of("<p>posted 07/03/2006 ok</p>")
    result = eval_expr(expr_of('pat("{today}")'), page, TODAY)
    assert len(result) == 1
    piece = result.pieces[0]
    assert page.source[piece.start : piece.end] == "07/03/2006"


def test_today_substitution_is_regex_escaped():
    # dots in the formatted date must match literally, not as wildcards
    page = page_of("<p>07a03b2006 vs 07.03.2006</p>")
    text = 'category x { date_format: "dd.MM.yyyy" list: pcdata() f = pat("{today}") }'
    rule = parse_rules(text).categories[0]
    result = eval_expr(dict(rule.fields)["f"], page, TODAY, rule.date_format)
    assert [page.source[p.start : p.end] for p in result.pieces] == ["07.03.2006"]


def test_eval_out_of_bounds_has_location():
    page = page_of("<p>a</p>")
    with pytest.raises(EvalError) as err:
        eval_expr(expr_of("pcdata()[5]"), page, TODAY)
    assert err.value.line == 1 and err.value.col > 0


def test_eval_bad_pattern_has_location():
    page = page_of("<p>a</p>")
    with pytest.raises(EvalError):
        eval_expr(expr_of('pat("[broken")'), page, TODAY)


def test_eval_composes_with_oracle():
    source = "<div>Rs 5,000 or Rs 900</div>"
    page = page_of(source)
    result = eval_expr(expr_of('pat("Rs [0-9,]+")'), page, TODAY)
    assert result.spans() == pat_spans(source, "Rs [0-9,]+")


def test_pattern_search_crosses_text_node_boundaries():
    # tags are invisible to pattern search, so adjacent text nodes join
    # with no separator: patterns can run across element boundaries
    page = page_of("<p>Rs 95,000</p><p>07/03/2006</p>")
    result = eval_expr(expr_of('pat("Rs [0-9,]+")'), page, TODAY)
    texts = [page.text_stream.text_in_span(p.start, p.end) for p in result.pieces]
    assert texts == ["Rs 95,00007"]


# --- record extraction ----------------------------------------------------------


ADS_PAGE = """
<html><body>
<div class="ad"><h1>Honda Civic 2004</h1> <p>Rs 250,000</p> <p>07/03/2006</p> <p>254-1234</p></div>
<div class="ad"><h1>Toyota Corolla</h1> <p>Rs 120,000</p> <p>07/03/2006</p> <p>208-5566</p></div>
<div class="ad"><h1>Nissan Sunny</h1> <p>Rs 95,000</p> <p>07/03/2006</p></div>
</body></html>
"""

ADS_RULE = """
category vehicles.cars {
  date_format: "dd/MM/yyyy"
  list: elem(div) contain elem(h1)
  title = pcdata() inside elem(h1)
  price = pat("Rs [0-9,]+")
  date = pat("{today}")
  contacts = pat("[0-9]{3}-[0-9]{4}")
}
"""


def test_extract_records_three_ads():
    rule = parse_rules(ADS_RULE).categories[0]
    records = extract_records(page_of(ADS_PAGE), rule, TODAY)
    assert len(records) == 3
    assert all(len(record) == 4 for record in records)
    assert records[0][0] == ["Honda Civic 2004"]
    assert records[1][1] == ["Rs 120,000"]


def test_extract_records_nothing_matches():
    rule = parse_rules(ADS_RULE).categories[0]
    assert extract_records(page_of("<p>no ads here</p>"), rule, TODAY) == []


def test_extract_records_missing_field_is_empty_list():
    rule = parse_rules(ADS_RULE).categories[0]
    records = extract_records(page_of(ADS_PAGE), rule, TODAY)
    assert records[2][3] == []  # third ad has no contact number


def test_extract_records_in_document_order():
    rule = parse_rules(ADS_RULE).categories[0]
    records = extract_records(page_of(ADS_PAGE), rule, TODAY)
    titles = [record[0][0] for record in records]
    assert titles == ["Honda Civic 2004", "Toyota Corolla", "Nissan Sunny"]


def test_extraction_is_deterministic():
    rule = parse_rules(ADS_RULE).categories[0]
    page = page_of(ADS_PAGE)
    assert extract_records(page, rule, TODAY) == extract_records(page, rule, TODAY)


def test_field_values_occur_in_advert_text():
    rule = parse_rules(ADS_RULE).categories[0]
    page = page_of(ADS_PAGE)
    adverts = eval_expr(rule.list_expr, page, TODAY, rule.date_format)
    records = extract_records(page, rule, TODAY)
    for advert_piece, record in zip(adverts, records):
        advert_text = page.text_stream.text_in_span(advert_piece.start, advert_piece.end)
        for matches in record:
            for value in matches:
                assert value in advert_text


# --- advert construction ---------------------------------------------------------


def test_nsl_to_advert_basic():
    rule = parse_rules(ADS_RULE).categories[0]
    nsl = [["Honda Civic"], ["Rs 250,000"], ["07/03/2006"], ["254-1234"]]
    advert = nsl_to_advert(nsl, rule, "http://t/a", SEEN)
    assert advert.fields == {
        "title": "Honda Civic",
        "price": "Rs 250,000",
        "date": "07/03/2006",
        "contacts": "254-1234",
    }
    assert advert.category == "vehicles.cars"
    assert advert.source_url == "http://t/a"
    assert len(advert.content_hash) == 16


def test_nsl_to_advert_normalizes_whitespace():
    rule = parse_rules(ADS_RULE).categories[0]
    nsl = [["  Honda\n  Civic "], [], [], []]
    advert = nsl_to_advert(nsl, rule, "http://t/a", SEEN)
    assert advert.fields["title"] == "Honda Civic"
    assert advert.fields["price"] == ""


def test_nsl_to_advert_all_empty():
    rule = parse_rules(ADS_RULE).categories[0]
    advert = nsl_to_advert([[], [], [], []], rule, "http://t/a", SEEN)
    assert all(v == "" for v in advert.fields.values())


def test_nsl_to_advert_shape_mismatch():
    rule = parse_rules(ADS_RULE).categories[0]
    with pytest.raises(ShapeMismatch):
        nsl_to_advert([[], [], []], rule, "http://t/a", SEEN)


def test_first_match_wins():
    rule = parse_rules(ADS_RULE).categories[0]
    nsl = [["first", "second"], [], [], []]
    assert nsl_to_advert(nsl, rule, "http://t/a", SEEN).fields["title"] == "first"
