"""Crime-report parsing, code clustering, template filling, and the n-gram
overlap metric. The end-to-end fill cases pin exact output strings."""

from __future__ import annotations

import datetime
import json

import pytest

from conftest import FIXTURES
from paratype.errors import ParseError, ValidationError
from paratype.ledegen import (
    CodeClusterConfig,
    CodeEntry,
    CodeTable,
    ClusterRule,
    CrimeReport,
    EvaluationResult,
    TemplateSet,
    cluster_codes,
    evaluate_corpus,
    fill_slots,
    load_code_table,
    load_lede_config,
    longest_common_span,
    ngram_overlap,
    parse_reports,
    write_eval_csv,
    write_ledes_jsonl,
)

ASSAULT_LEDE = (
    "The suspect assaulted the 59-year-old black disabled male victim near "
    "the Wilshire/Vermont metro station, while shouting a unusual statements."
)
VANDALISM_LEDE = (
    "The suspect vandalized at Marmion Apt. causing a damage of $400 or less."
)


def _fixture_setup():
    parsed = parse_reports(str(FIXTURES / "crime_reports.csv"))
    table = load_code_table(str(FIXTURES / "code_table.csv"))
    config = load_lede_config(str(FIXTURES / "lede_config.json"))
    return parsed, table, config


class TestParseReports:
    def test_fixture_rows(self):
        parsed, _, _ = _fixture_setup()
        assert parsed.errors == ()
        assert [r.id for r in parsed.reports] == ["R1", "R2"]
        r1, r2 = parsed.reports
        assert r1.crime_type == "SIMPLE ASSAULT"
        assert r1.location == "3100 block of Wilshire Blvd., Los Angeles"
        assert r1.codes == ("0359", "1238", "2057", "1506", "0305", "0429", "0903")
        assert r1.victim_age == 59
        assert r1.victim_descent == "black"
        assert r1.victim_sex == "male"
        assert r1.date == datetime.date(2019, 3, 4)
        assert r1.damage_value is None
        assert r2.victim_age is None
        assert r2.damage_value == "$400 or less"

    def test_bad_rows_are_skipped_with_line_numbers(self, tmp_path):
        path = tmp_path / "reports.csv"
        path.write_text(
            "id,crime_type,location,codes,victim_age,victim_descent,"
            "victim_sex,date,damage_value\n"
            "ok,THEFT,somewhere,0100,30,white,female,2020-01-06,\n"
            "bad1,THEFT,somewhere,0100,thirty,white,female,2020-01-06,\n"
            "bad2,THEFT,somewhere,01x0,30,white,female,2020-01-06,\n"
            "bad3,,somewhere,0100,30,white,female,2020-01-06,\n",
            encoding="utf-8",
        )
        parsed = parse_reports(str(path))
        assert [r.id for r in parsed.reports] == ["ok"]
        assert [lineno for lineno, _ in parsed.errors] == [3, 4, 5]

    def test_missing_column_rejected(self, tmp_path):
        path = tmp_path / "reports.csv"
        path.write_text("id,crime_type\nR,THEFT\n", encoding="utf-8")
        with pytest.raises(ParseError, match="column"):
            parse_reports(str(path))

    def test_report_validation(self):
        with pytest.raises(ValidationError, match="crime_type"):
            CrimeReport(id="x", crime_type="")
        with pytest.raises(ValidationError, match="code"):
            CrimeReport(id="x", crime_type="THEFT", codes=("12a4",))


class TestCodeTable:
    def test_fixture_entries(self):
        _, table, _ = _fixture_setup()
        assert "0359" in table
        entry = table.get("0359")
        assert entry.description == "while shouting a unusual statements"
        assert entry.category == "Suspect Behavior"
        assert table.get("0329").category == ""
        assert table.get("9999") is None

    def test_duplicate_code_rejected(self, tmp_path):
        path = tmp_path / "codes.csv"
        path.write_text(
            "code,description,category\n0100,first,\n0100,second,\n",
            encoding="utf-8",
        )
        with pytest.raises(ValidationError, match="duplicate"):
            load_code_table(str(path))


class TestClusterCodes:
    def test_fixture_report_clusters(self):
        parsed, table, config = _fixture_setup()
        clusters = cluster_codes(parsed.reports[0], table, config.clusters)
        by = {name: [c for c, _ in entries] for name, entries in clusters.by_cluster.items()}
        assert by["suspect behavior"] == ["0359"]
        assert by["victim details"] == ["1238", "2057"]
        assert by["bias"] == ["1506", "0903"]
        assert by["action"] == ["0305", "0429"]
        assert clusters.warnings == ()

    def test_first_matching_rule_wins(self):
        table = CodeTable(entries={"0001": CodeEntry("attack on victim", "Action")})
        config = CodeClusterConfig(
            rules=(
                ClusterRule(name="victim details", keywords=("victim",)),
                ClusterRule(name="action", keywords=("attack",)),
            )
        )
        report = CrimeReport(id="r", crime_type="THEFT", codes=("0001",))
        clusters = cluster_codes(report, table, config)
        assert clusters.by_cluster["victim details"] == (("0001", "attack on victim"),)
        assert clusters.by_cluster["action"] == ()

    def test_unknown_code_goes_to_other_with_warning(self):
        table = CodeTable(entries={})
        config = CodeClusterConfig(rules=())
        report = CrimeReport(id="r", crime_type="THEFT", codes=("9999",))
        clusters = cluster_codes(report, table, config)
        assert clusters.by_cluster["other"] == (("9999", ""),)
        assert clusters.warnings == ("unknown code 9999",)

    def test_unmatched_known_code_goes_to_other_silently(self):
        table = CodeTable(entries={"0001": CodeEntry("something benign", "")})
        config = CodeClusterConfig(rules=(ClusterRule(name="bias", keywords=("hate",)),))
        report = CrimeReport(id="r", crime_type="THEFT", codes=("0001",))
        clusters = cluster_codes(report, table, config)
        assert clusters.by_cluster["other"] == (("0001", "something benign"),)
        assert clusters.warnings == ()

    def test_config_validation(self):
        with pytest.raises(ValidationError, match="unknown cluster"):
            CodeClusterConfig(rules=(ClusterRule(name="nonsense", keywords=("x",)),))
        with pytest.raises(ValidationError, match="duplicate"):
            CodeClusterConfig(
                rules=(
                    ClusterRule(name="bias", keywords=("a",)),
                    ClusterRule(name="bias", keywords=("b",)),
                )
            )
        with pytest.raises(ValidationError, match="lowercase"):
            CodeClusterConfig(rules=(ClusterRule(name="bias", keywords=("Hate",)),))


class TestTemplates:
    def test_unknown_slot_rejected(self):
        with pytest.raises(ValidationError, match="unknown slot"):
            TemplateSet(by_type={"THEFT": "took <the thing>"})

    def test_malformed_markers_rejected(self):
        with pytest.raises(ValidationError, match="malformed"):
            TemplateSet(by_type={"THEFT": "a < b"})

    def test_missing_crime_type_named(self):
        templates = TemplateSet(by_type={})
        with pytest.raises(ValidationError, match="ARSON"):
            templates.text_for("ARSON")


class TestFillSlots:
    def test_assault_lede_is_byte_exact(self):
        parsed, table, config = _fixture_setup()
        result = fill_slots(
            parsed.reports[0], config.templates, table, config.clusters,
            config.verbs, config.fallback_spans,
        )
        assert result.text == ASSAULT_LEDE
        assert result.unfilled == ()
        assert result.warnings == ()
        assert result.filled["location indicator"] == "the Wilshire/Vermont metro station"
        assert result.filled["other details"] == "while shouting a unusual statements"

    def test_vandalism_lede_is_byte_exact(self):
        parsed, table, config = _fixture_setup()
        result = fill_slots(
            parsed.reports[1], config.templates, table, config.clusters,
            config.verbs, config.fallback_spans,
        )
        assert result.text == VANDALISM_LEDE
        assert result.unfilled == ()

    def test_unfillable_slot_keeps_marker(self):
        templates = TemplateSet(by_type={"THEFT": "Seen: <suspect description>."})
        report = CrimeReport(id="r", crime_type="THEFT")
        result = fill_slots(report, templates, CodeTable(entries={}),
                            CodeClusterConfig(rules=()), {}, {})
        assert result.unfilled == ("suspect description",)
        assert "<suspect description>" in result.text

    def test_victim_description_elides_missing_parts(self):
        templates = TemplateSet(by_type={"THEFT": "Hurt <victim description>."})
        report = CrimeReport(id="r", crime_type="THEFT")
        result = fill_slots(report, templates, CodeTable(entries={}),
                            CodeClusterConfig(rules=()), {}, {})
        assert result.text == "Hurt the victim."

    def test_disability_marker_requires_victim_details_cluster(self):
        templates = TemplateSet(by_type={"THEFT": "Hurt <victim description>."})
        table = CodeTable(entries={"0001": CodeEntry("Victim was handicapped", "Victim details")})
        config = CodeClusterConfig(rules=(ClusterRule(name="victim details", keywords=("victim details",)),))
        report = CrimeReport(id="r", crime_type="THEFT", codes=("0001",), victim_sex="female")
        result = fill_slots(report, templates, table, config, {}, {})
        assert result.text == "Hurt the disabled female victim."
        # same code binned elsewhere must not set the marker
        config2 = CodeClusterConfig(rules=(ClusterRule(name="bias", keywords=("victim",)),))
        result2 = fill_slots(report, templates, table, config2, {}, {})
        assert result2.text == "Hurt the female victim."

    def test_whitespace_is_normalized(self):
        templates = TemplateSet(by_type={"THEFT": "At <location description> , done."})
        report = CrimeReport(id="r", crime_type="THEFT", location="Main   St.")
        result = fill_slots(report, templates, CodeTable(entries={}),
                            CodeClusterConfig(rules=()), {}, {})
        assert result.text == "At Main St., done."

    def test_repeated_slot_fills_every_occurrence(self):
        templates = TemplateSet(
            by_type={"THEFT": "<crime type verb> and <crime type verb> again."}
        )
        report = CrimeReport(id="r", crime_type="THEFT")
        result = fill_slots(report, templates, CodeTable(entries={}),
                            CodeClusterConfig(rules=()), {"THEFT": "struck"}, {})
        assert result.text == "struck and struck again."


class TestLongestCommonSpan:
    def test_longest_shared_run(self):
        span = longest_common_span(
            ["the big dog barked today", "a big dog barked loudly"]
        )
        assert span == "big dog barked"

    def test_ties_prefer_earliest_in_first(self):
        assert longest_common_span(["a b x c d", "c d y a b"]) == "a b"

    def test_no_overlap_is_empty(self):
        assert longest_common_span(["alpha beta", "gamma delta"]) == ""

    def test_tokenization_ignores_case_and_punctuation(self):
        assert longest_common_span(["Hello, world!", "hello world"]) == "hello world"

    def test_all_ledes_must_contain_the_span(self):
        span = longest_common_span(["a b c", "z a b", "a b q", "p a b"])
        assert span == "a b"

    def test_requires_two_ledes(self):
        with pytest.raises(ValidationError, match="at least 2"):
            longest_common_span(["only one"])


class TestNgramOverlap:
    def test_identical_text_scores_one(self):
        assert ngram_overlap("The cat sat on the mat.", "the cat sat on the mat", 2) == 1.0

    def test_disjoint_text_scores_zero(self):
        assert ngram_overlap("alpha beta gamma", "delta epsilon zeta", 2) == 0.0

    def test_hand_bigram_fraction(self):
        """Truth has 6 distinct bigrams, the generation reproduces 5."""
        truth = "a b c d e f g"
        generated = "a b c d e f x"
        assert ngram_overlap(generated, truth, 2) == 5 / 6

    def test_set_semantics_ignore_repeats(self):
        assert ngram_overlap("go go go", "go go", 1) == 1.0

    def test_order_of_arguments_matters(self):
        # denominator is the truth side
        assert ngram_overlap("a b c", "a b", 1) == 1.0
        assert ngram_overlap("a b", "a b c", 1) == 2 / 3

    def test_truth_without_ngrams_rejected(self):
        with pytest.raises(ValidationError, match="no 2-grams"):
            ngram_overlap("a b", "single", 2)
        with pytest.raises(ValidationError, match="no 1-grams"):
            ngram_overlap("a", "...", 1)

    def test_n_must_be_positive(self):
        with pytest.raises(ValidationError):
            ngram_overlap("a", "a", 0)


class TestEvaluateCorpus:
    def test_macro_average_weights_types_equally(self):
        """Per-type means (0.5, 1.0) average to 0.75 regardless of how many
        pairs each type contributed."""
        pairs = [
            ("assault", "alpha beta", "alpha beta"),
            ("assault", "zz qq", "alpha beta"),
            ("vandalism", "cc dd", "cc dd"),
        ]
        result = evaluate_corpus(pairs, 1)
        assert result.per_type == (("assault", 0.5), ("vandalism", 1.0))
        assert result.overall == 0.75
        assert result.n == 1

    def test_fixture_pairs(self):
        """The bundled pairs score 5/6, 1.0, and 0.5 at n=2."""
        import csv

        with open(FIXTURES / "eval_pairs.csv", encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
        pairs = [(r["crime_type"], r["generated"], r["truth"]) for r in rows]
        result = evaluate_corpus(pairs, 2)
        assert dict(result.per_type) == {
            "SIMPLE ASSAULT": 0.75,
            "VANDALISM - MISDEMEANOR": pytest.approx(5 / 6),
        }
        assert result.overall == pytest.approx(19 / 24)

    def test_bad_pair_is_named_by_index(self):
        pairs = [("a", "x y", "x y"), ("a", "x", "")]
        with pytest.raises(ValidationError, match="pair 1"):
            evaluate_corpus(pairs, 1)

    def test_empty_input_rejected(self):
        with pytest.raises(ValidationError, match="no pairs"):
            evaluate_corpus([], 1)


class TestLedeConfig:
    def test_fixture_loads(self):
        _, _, config = _fixture_setup()
        assert config.verbs["SIMPLE ASSAULT"] == "assaulted"
        assert ("SIMPLE ASSAULT", "location indicator") in config.fallback_spans
        assert config.clusters.cluster_names[-1] == "other"

    def test_unknown_version_rejected(self, tmp_path):
        path = tmp_path / "lede.json"
        path.write_text(json.dumps({"version": 2, "templates": {}}), encoding="utf-8")
        with pytest.raises(ParseError, match="version"):
            load_lede_config(str(path))

    def test_invalid_json_rejected(self, tmp_path):
        path = tmp_path / "lede.json"
        path.write_text("{oops", encoding="utf-8")
        with pytest.raises(ParseError, match="invalid JSON"):
            load_lede_config(str(path))


class TestWriters:
    def test_ledes_jsonl_canonical_lines(self, tmp_path):
        parsed, table, config = _fixture_setup()
        items = []
        for report in parsed.reports:
            items.append(
                (
                    report,
                    fill_slots(report, config.templates, table, config.clusters,
                               config.verbs, config.fallback_spans),
                )
            )
        path = tmp_path / "ledes.jsonl"
        write_ledes_jsonl(items, str(path))
        lines = path.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 2
        first = json.loads(lines[0])
        assert first["id"] == "R1"
        assert first["text"] == ASSAULT_LEDE
        assert json.loads(lines[1])["text"] == VANDALISM_LEDE
        # canonical encoding: sorted keys, no spaces
        assert lines[0] == json.dumps(json.loads(lines[0]), sort_keys=True, separators=(",", ":"))

    def test_eval_csv_layout_and_quoting(self, tmp_path):
        result = EvaluationResult(
            per_type=(("a,type", 0.5), ("plain", 1.0)), overall=0.75, n=2
        )
        path = tmp_path / "eval.csv"
        write_eval_csv(result, str(path))
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "crime_type,n,mean_acc"
        assert lines[1] == '"a,type",2,0.5'
        assert lines[2] == "plain,2,1.0"
        assert lines[3] == "overall,2,0.75"
