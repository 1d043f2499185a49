from __future__ import annotations

import random

import pytest

from malbehave import (
    EngineLabelTable,
    FamilyNormalizer,
    Grouping,
    approval,
    engine_weight,
    grouping_to_labels,
    indicator,
    normalize_family,
    pcs_report,
    pcs_score,
    text_mining_grouping,
)
from _oracles import brute_force_pcs


def _table(ids, engines, rows):
    return EngineLabelTable(tuple(ids), tuple(engines), tuple(tuple(row) for row in rows))


THREE_BY_TWO = _table(
    ["m1", "m2", "m3"],
    ["x", "y"],
    [["f", "f"], ["f", "g"], ["g", "g"]],
)

IDENTICAL_PAIR = _table(
    ["m1", "m2", "m3"],
    ["x", "y"],
    [["f", "f"], ["f", "f"], ["g", "g"]],
)


class TestNormalizeFamily:
    @pytest.mark.parametrize(
        "raw,expected",
        [
            ("Win32.Morstar.ba", "morstar"),
            ("APPL/Firseria.A.15", "firseria"),
            ("", None),
            ("Win32.Variant", None),
            ("TROJ_GEN.R002C0DGR21", "r002c0dgr21"),
            ("Solimba Installer", "installer"),
            ("deadbeef.1234", None),
        ],
    )
    def test_examples(self, raw, expected):
        assert normalize_family(raw) == expected

    def test_idempotent(self):
        rng = random.Random(8)
        samples = ["Win32.Morstar.ba", "APPL/Firseria.A.15", "Gen:Adware.Heur.1", "TROJAN x99"]
        for raw in samples + ["".join(rng.choices("abcXYZ./_123", k=12)) for _ in range(50)]:
            first = normalize_family(raw)
            if first is not None:
                assert normalize_family(first) == first

    def test_custom_stop_words(self):
        nz = FamilyNormalizer(stop_words=frozenset({"morstar"}))
        assert normalize_family("Win32.Morstar.ba", nz) == "win32"


class TestIndicator:
    def test_same_family(self):
        assert indicator(THREE_BY_TWO, "x", "m1", "m2") == 1

    def test_different_family(self):
        assert indicator(THREE_BY_TWO, "x", "m1", "m3") == -1

    def test_null_cell(self):
        table = _table(["m1", "m2"], ["x"], [[None], ["f"]])
        assert indicator(table, "x", "m1", "m2") == 0

    def test_symmetry(self):
        rng = random.Random(17)
        table = _random_table(rng, 6, 3, 0.3)
        ids = table.malware_ids
        for engine in table.engines:
            for i in ids:
                for j in ids:
                    if i != j:
                        assert indicator(table, engine, i, j) == indicator(table, engine, j, i)

    def test_identical_ids_rejected(self):
        with pytest.raises(ValueError, match="distinct"):
            indicator(THREE_BY_TWO, "x", "m1", "m1")

    def test_unknown_engine_and_id(self):
        with pytest.raises(ValueError, match="engine"):
            indicator(THREE_BY_TWO, "zz", "m1", "m2")
        with pytest.raises(ValueError, match="malware"):
            indicator(THREE_BY_TWO, "x", "m1", "zz")


class TestWeight:
    def test_all_detected(self):
        assert engine_weight(THREE_BY_TWO, "x") == 1.0

    def test_none_detected(self):
        table = _table(["m1", "m2"], ["x"], [[None], [None]])
        assert engine_weight(table, "x") == 0.0

    def test_half_detected(self):
        table = _table(["m1", "m2", "m3", "m4"], ["x"], [["f"], [None], ["g"], [None]])
        assert engine_weight(table, "x") == 0.5


class TestApproval:
    def test_self_approval_with_both_pair_kinds(self):
        assert approval(THREE_BY_TWO, "x", "x") == 2.0

    def test_hand_worked_half(self):
        assert approval(THREE_BY_TWO, "x", "y") == 0.5

    def test_all_same_labels(self):
        table = _table(["m1", "m2", "m3"], ["x", "y"], [["f", "a"], ["f", "a"], ["f", "a"]])
        assert approval(table, "x", "y") == 1.0

    def test_null_peer_counts_as_disagreement(self):
        table = _table(["m1", "m2"], ["x", "y"], [["f", None], ["f", "a"]])
        assert approval(table, "x", "y") == 0.0

    def test_range(self):
        rng = random.Random(3)
        for _ in range(50):
            table = _random_table(rng, rng.randint(2, 7), rng.randint(1, 4), 0.25)
            for a in table.engines:
                for b in table.engines:
                    assert 0.0 <= approval(table, a, b) <= 2.0


class TestPcsScore:
    def test_single_engine(self):
        table = _table(["m1", "m2", "m3"], ["x"], [["f"], ["f"], ["g"]])
        assert pcs_score(table, "x") == 2.0

    def test_identical_engines(self):
        assert pcs_score(IDENTICAL_PAIR, "x") == 2.0
        assert pcs_score(IDENTICAL_PAIR, "y") == 2.0

    def test_hand_worked_example(self):
        assert pcs_score(THREE_BY_TWO, "x") == 1.25

    def test_needs_two_samples(self):
        table = _table(["m1"], ["x"], [["f"]])
        with pytest.raises(ValueError, match="at least 2"):
            pcs_score(table, "x")

    def test_matches_brute_force(self):
        rng = random.Random(90125)
        for _ in range(80):
            table = _random_table(rng, rng.randint(2, 8), rng.randint(1, 5), 0.2)
            rows = [list(row) for row in table.labels]
            for engine in table.engines:
                expected = brute_force_pcs(
                    list(table.malware_ids), list(table.engines), rows, engine
                )
                score = pcs_score(table, engine)
                assert 0.0 <= score <= 2.0
                assert abs(score - expected) <= 1e-12

    def test_label_bijection_invariance(self):
        rng = random.Random(404)
        for _ in range(40):
            table = _random_table(rng, rng.randint(2, 7), rng.randint(1, 4), 0.2)
            engine = rng.choice(table.engines)
            index = table.engine_index(engine)
            alphabet = sorted({row[index] for row in table.labels if row[index] is not None})
            renamed = {old: f"renamed_{k}" for k, old in enumerate(reversed(alphabet))}
            rows = tuple(
                tuple(
                    renamed[cell] if e == index and cell is not None else cell
                    for e, cell in enumerate(row)
                )
                for row in table.labels
            )
            other = EngineLabelTable(table.malware_ids, table.engines, rows)
            for probe in table.engines:
                assert pcs_score(table, probe) == pcs_score(other, probe)

    def test_adding_identical_engine_never_decreases(self):
        rng = random.Random(777)
        for _ in range(40):
            table = _random_table(rng, rng.randint(2, 7), rng.randint(1, 4), 0.2)
            engine = rng.choice(table.engines)
            index = table.engine_index(engine)
            clone = {mid: row[index] for mid, row in zip(table.malware_ids, table.labels)}
            bigger = table.with_engine("clone_of_x", clone)
            assert pcs_score(bigger, engine) >= pcs_score(table, engine) - 1e-12


class TestGroupingLabels:
    def test_two_groups(self):
        labels = grouping_to_labels(Grouping(0.5, (("A", "B"), ("C",))))
        assert labels == {"A": "g0", "B": "g0", "C": "g1"}

    def test_all_singletons(self):
        grouping = Grouping(0.0, (("A",), ("B",), ("C",)))
        assert len(set(grouping_to_labels(grouping).values())) == 3

    def test_one_group(self):
        grouping = Grouping(1.0, (("A", "B", "C"),))
        assert set(grouping_to_labels(grouping).values()) == {"g0"}


class TestTextMining:
    def test_identical_descriptions(self):
        grouping = text_mining_grouping({"a": "adware installer", "b": "adware installer"})
        assert grouping("a", "b") == 1

    def test_disjoint_vocabulary(self):
        grouping = text_mining_grouping({"a": "adware installer", "b": "worm dropper"})
        assert grouping("a", "b") == -1

    def test_hand_worked_cosine(self):
        # dot=2, norms sqrt(3)*sqrt(2) -> cosine ~0.816 above 0.7
        grouping = text_mining_grouping(
            {"a": "adware installer bundle", "b": "adware installer"}, threshold=0.7
        )
        assert grouping("a", "b") == 1

    def test_empty_description_behaves_as_null(self):
        grouping = text_mining_grouping({"a": "adware", "b": ""})
        assert grouping("a", "b") == 0
        assert "b" not in grouping.detected

    def test_stop_words_removed(self):
        grouping = text_mining_grouping({"a": "Win32 adware", "b": "variant adware"})
        assert grouping("a", "b") == 1

    def test_threshold_validation(self):
        with pytest.raises(ValueError, match="threshold"):
            text_mining_grouping({"a": "x"}, threshold=1.5)

    def test_exact_threshold_one_on_identical(self):
        grouping = text_mining_grouping({"a": "adware installer", "b": "adware installer"}, threshold=1.0)
        assert grouping("a", "b") == 1


class TestTableFormats:
    def test_json_round_trip(self):
        parsed = EngineLabelTable.from_json(THREE_BY_TWO.to_json())
        assert parsed == THREE_BY_TWO

    def test_csv_round_trip_with_nulls(self):
        table = _table(["m1", "m2"], ["x", "y"], [["f", None], [None, "g"]])
        parsed = EngineLabelTable.from_csv(table.to_csv())
        assert parsed == table

    def test_csv_shape_error(self):
        with pytest.raises(ValueError, match="cells"):
            EngineLabelTable.from_csv("malware_id,x\nm1,f,extra\n")

    def test_with_engine_rejects_duplicates(self):
        with pytest.raises(ValueError, match="already present"):
            THREE_BY_TWO.with_engine("x", {})

    def test_normalized_table(self):
        table = _table(["m1", "m2"], ["x"], [["Win32.Morstar.ba"], ["APPL/Firseria.A.15"]])
        assert table.normalized().labels == (("morstar",), ("firseria",))

    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValueError, match="unique"):
            _table(["m1", "m1"], ["x"], [["f"], ["g"]])


class TestReport:
    def test_sorted_by_score(self):
        report = pcs_report(THREE_BY_TWO)
        assert [row["engine"] for row in report] == ["x", "y"]
        assert report[0]["pcs"] == report[1]["pcs"] == 1.25
        assert all(set(row) == {"engine", "detected", "weight", "pcs"} for row in report)

    def test_includes_indicator_engines(self):
        descriptions = {"m1": "installer adware", "m2": "installer adware", "m3": "worm"}
        report = pcs_report(THREE_BY_TWO, [("Text_Mining", text_mining_grouping(descriptions))])
        names = [row["engine"] for row in report]
        assert "Text_Mining" in names
        tm = next(row for row in report if row["engine"] == "Text_Mining")
        assert tm["detected"] == 3
        assert 0.0 <= tm["pcs"] <= 2.0

    def test_injected_grouping_matches_manual_column(self):
        grouping = Grouping(0.5, (("m1", "m2"), ("m3",)))
        injected = THREE_BY_TWO.with_engine("vote", grouping_to_labels(grouping))
        report = pcs_report(injected)
        manual = THREE_BY_TWO.with_engine(
            "vote", {"m1": "g0", "m2": "g0", "m3": "g1"}
        )
        assert report == pcs_report(manual)


def _random_table(rng: random.Random, n: int, m: int, null_rate: float) -> EngineLabelTable:
    ids = tuple(f"m{i}" for i in range(n))
    engines = tuple(f"e{j}" for j in range(m))
    families = ["fam_a", "fam_b", "fam_c", "fam_d"]
    rows = tuple(
        tuple(None if rng.random() < null_rate else rng.choice(families) for _ in engines)
        for _ in ids
    )
    return EngineLabelTable(ids, engines, rows)
