from __future__ import annotations

import json

import pytest

from editkit.core import EditTask, Split
from editkit.corpora import CorpusFormatError, UnknownCorpusError, ingest, registered_corpora


class TestRegistry:
    def test_unknown_corpus(self, tmp_path):
        path = tmp_path / "x.txt"
        path.write_text("a\tb\n", encoding="utf-8")
        with pytest.raises(UnknownCorpusError):
            ingest("nope", path, EditTask.GEC, Split.TRAIN)

    def test_expected_adapters_registered(self):
        expected = {"jsonl", "tsv", "nucle", "bea19", "lang8", "discofuse", "gyafc",
                    "wnc", "parabankv2", "newsela", "wikilarge", "wikiauto", "iterater",
                    "jfleg"}
        assert expected.issubset(set(registered_corpora()))

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            ingest("tsv", tmp_path / "absent.tsv", EditTask.GEC, Split.TRAIN)


class TestJsonlAdapter:
    def test_three_well_formed_lines(self, tmp_path):
        path = tmp_path / "c.jsonl"
        rows = [{"source": f"src {i}", "target": f"tgt {i}"} for i in range(3)]
        path.write_text("\n".join(json.dumps(r) for r in rows), encoding="utf-8")
        pairs = ingest("jsonl", path, EditTask.GEC, Split.TRAIN)
        assert len(pairs) == 3
        assert all(p.task is EditTask.GEC and p.split is Split.TRAIN for p in pairs)

    def test_empty_source_names_line(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text(
            json.dumps({"source": "ok", "target": "ok"}) + "\n"
            + json.dumps({"source": "  ", "target": "x"}) + "\n",
            encoding="utf-8",
        )
        with pytest.raises(CorpusFormatError) as err:
            ingest("jsonl", path, EditTask.GEC, Split.TRAIN)
        assert err.value.lineno == 2

    def test_record_split_overrides_file_split(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text(json.dumps({"source": "a", "target": "b", "split": "validation"}),
                        encoding="utf-8")
        (pair,) = ingest("jsonl", path, EditTask.GEC, Split.TRAIN)
        assert pair.split is Split.VALIDATION

    def test_invalid_json_names_line(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text('{"source": "a", "target": "b"}\nnot json\n', encoding="utf-8")
        with pytest.raises(CorpusFormatError) as err:
            ingest("jsonl", path, EditTask.GEC, Split.TRAIN)
        assert err.value.lineno == 2


class TestM2Adapter:
    def test_edit_application(self, tmp_path):
        path = tmp_path / "c.m2"
        path.write_text(
            "S He go home yesterday\n"
            "A 1 2|||Verb|||goes|||REQUIRED|||-NONE-|||0\n"
            "\n"
            "S She like it\n"
            "A 1 2|||Verb|||likes|||REQUIRED|||-NONE-|||0\n"
            "A 3 3|||Punct|||.|||REQUIRED|||-NONE-|||0\n",
            encoding="utf-8",
        )
        pairs = ingest("nucle", path, EditTask.GEC, Split.TRAIN)
        assert [p.target for p in pairs] == ["He goes home yesterday", "She likes it ."]

    def test_ignores_other_annotators_and_noop(self, tmp_path):
        path = tmp_path / "c.m2"
        path.write_text(
            "S He go home\n"
            "A 1 2|||Verb|||goes|||REQUIRED|||-NONE-|||1\n"
            "A -1 -1|||noop|||-NONE-|||REQUIRED|||-NONE-|||0\n",
            encoding="utf-8",
        )
        (pair,) = ingest("bea19", path, EditTask.GEC, Split.TRAIN)
        assert pair.target == "He go home"

    def test_edit_before_source_is_error(self, tmp_path):
        path = tmp_path / "c.m2"
        path.write_text("A 0 1|||X|||y|||REQUIRED|||-NONE-|||0\n", encoding="utf-8")
        with pytest.raises(CorpusFormatError):
            ingest("nucle", path, EditTask.GEC, Split.TRAIN)


class TestDiscofuseAdapter:
    HEADER = ("coherent_first_sentence\tcoherent_second_sentence\tincoherent_first_sentence"
              "\tincoherent_second_sentence\tdiscourse_type")

    def test_fusion(self, tmp_path):
        path = tmp_path / "train.tsv"
        path.write_text(
            self.HEADER + "\n"
            + "Their flight is weak, but they run quickly.\t\tTheir flight is weak.\tThey run quickly.\tPAIR_CONN\n",
            encoding="utf-8",
        )
        (pair,) = ingest("discofuse", path, EditTask.COHERENCE, Split.TRAIN)
        assert pair.source == "Their flight is weak. They run quickly."
        assert pair.target == "Their flight is weak, but they run quickly."

    def test_missing_columns(self, tmp_path):
        path = tmp_path / "train.tsv"
        path.write_text("a\tb\n1\t2\n", encoding="utf-8")
        with pytest.raises(CorpusFormatError):
            ingest("discofuse", path, EditTask.COHERENCE, Split.TRAIN)


class TestGyafcAdapter:
    def test_parallel_with_references(self, tmp_path):
        (tmp_path / "informal").write_text("omg i love that\nso cool right\n", encoding="utf-8")
        (tmp_path / "formal").write_text("I love that.\nThat is very nice.\n", encoding="utf-8")
        (tmp_path / "formal.ref0").write_text("I really love that.\nIt is impressive.\n", encoding="utf-8")
        pairs = ingest("gyafc", tmp_path / "informal", EditTask.FORMALIZE, Split.TEST)
        assert len(pairs) == 2
        assert pairs[0].target == "I love that."
        assert pairs[0].references == ("I love that.", "I really love that.")

    def test_missing_formal_file(self, tmp_path):
        (tmp_path / "informal").write_text("hey\n", encoding="utf-8")
        with pytest.raises(CorpusFormatError):
            ingest("gyafc", tmp_path / "informal", EditTask.FORMALIZE, Split.TRAIN)


class TestWncAdapter:
    def test_prefers_raw_columns(self, tmp_path):
        path = tmp_path / "biased.word.train"
        path.write_text(
            "1\tsrc tok\ttgt tok\tThe raw biased text .\tThe raw neutral text .\n",
            encoding="utf-8",
        )
        (pair,) = ingest("wnc", path, EditTask.NEUTRALIZE, Split.TRAIN)
        assert pair.source == "The raw biased text ."
        assert pair.target == "The raw neutral text ."

    def test_falls_back_to_token_columns(self, tmp_path):
        path = tmp_path / "wnc.tsv"
        path.write_text("1\tbiased tokens\tneutral tokens\n", encoding="utf-8")
        (pair,) = ingest("wnc", path, EditTask.NEUTRALIZE, Split.TRAIN)
        assert pair.source == "biased tokens"


class TestOtherAdapters:
    def test_lang8_skips_uncorrected(self, tmp_path):
        path = tmp_path / "lang8.tsv"
        path.write_text("he go home\the goes home\nonly source no corr\n", encoding="utf-8")
        pairs = ingest("lang8", path, EditTask.GEC, Split.TRAIN)
        assert len(pairs) == 1

    def test_parabankv2_columns(self, tmp_path):
        path = tmp_path / "pb.tsv"
        path.write_text("0.91\tthe first sentence\tthe paraphrased sentence\n", encoding="utf-8")
        (pair,) = ingest("parabankv2", path, EditTask.PARAPHRASE, Split.TRAIN)
        assert pair.source == "the first sentence"
        assert pair.target == "the paraphrased sentence"

    def test_wikilarge_parallel_files(self, tmp_path):
        (tmp_path / "wiki.train.src").write_text("complex sentence one\n", encoding="utf-8")
        (tmp_path / "wiki.train.dst").write_text("simple sentence one\n", encoding="utf-8")
        (pair,) = ingest("wikilarge", tmp_path / "wiki.train.src", EditTask.SIMPLIFICATION, Split.TRAIN)
        assert pair.target == "simple sentence one"

    def test_wikilarge_length_mismatch(self, tmp_path):
        (tmp_path / "w.src").write_text("a one\nb two\n", encoding="utf-8")
        (tmp_path / "w.dst").write_text("a one\n", encoding="utf-8")
        with pytest.raises(CorpusFormatError):
            ingest("wikilarge", tmp_path / "w.src", EditTask.SIMPLIFICATION, Split.TRAIN)

    def test_jfleg_four_references_per_pair(self, tmp_path):
        (tmp_path / "test.src").write_text("he go home .\nshe like it .\n", encoding="utf-8")
        for i in range(4):
            (tmp_path / f"test.ref{i}").write_text(
                f"he goes home {i} .\nshe likes it {i} .\n", encoding="utf-8")
        pairs = ingest("jfleg", tmp_path / "test.src", EditTask.GEC, Split.TEST)
        assert len(pairs) == 2
        assert all(len(p.references) == 4 for p in pairs)
        assert pairs[0].target == pairs[0].references[0]

    def test_jfleg_needs_reference_files(self, tmp_path):
        (tmp_path / "test.src").write_text("he go home .\n", encoding="utf-8")
        with pytest.raises(CorpusFormatError):
            ingest("jfleg", tmp_path / "test.src", EditTask.GEC, Split.TEST)

    def test_iterater_maps_intents(self, tmp_path):
        path = tmp_path / "it.jsonl"
        rows = [
            {"before_sent": "a one", "after_sent": "a two", "labels": "fluency"},
            {"before_sent": "b one", "after_sent": "b two", "labels": "clarity"},
            {"before_sent": "c one", "after_sent": "c two", "labels": "meaning-changed"},
        ]
        path.write_text("\n".join(json.dumps(r) for r in rows), encoding="utf-8")
        pairs = ingest("iterater", path, EditTask.CLARITY, Split.TRAIN)
        assert [p.task for p in pairs] == [EditTask.GEC, EditTask.CLARITY]
