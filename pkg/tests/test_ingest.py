import json

import pytest

from rdpipe.ingest import (
    DuplicateId,
    EncodingError,
    FileMissing,
    GroundTruthKind,
    HTA_FIELDS,
    KindMismatch,
    MissingColumn,
    Origin,
    ParseError,
    RaggedRow,
    SourceDocument,
    load_corpus,
    load_csv_records,
    load_ground_truth,
    load_text_document,
)
from rdpipe.tasks.species import SpeciesName


def test_text_is_loaded_verbatim(tmp_path):
    text = "Abies alba Mill.\r\n\r\n  Acer  campestre L.\n\n\n"
    p = tmp_path / "page1.txt"
    p.write_bytes(text.encode("utf-8"))
    doc = load_text_document(p, language="de", origin="ocr-text")
    assert doc.text == text
    assert doc.id == "page1"
    assert doc.origin is Origin.OCR


def test_invalid_utf8_is_rejected(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_bytes(b"ok \xff\xfe")
    with pytest.raises(EncodingError):
        load_text_document(p)


def test_missing_file(tmp_path):
    with pytest.raises(FileMissing):
        load_text_document(tmp_path / "nope.txt")


def test_document_fields_are_validated():
    with pytest.raises(ValueError):
        SourceDocument(id="", text="x")
    with pytest.raises(ValueError):
        SourceDocument(id="a", text="x", language="")
    doc = SourceDocument(id="a", text="x", metadata={"k": "v"})
    with pytest.raises(TypeError):
        doc.metadata["k"] = "w"


def test_corpus_index_and_duplicates(tmp_path):
    (tmp_path / "a.txt").write_text("A", encoding="utf-8")
    (tmp_path / "b.txt").write_text("B", encoding="utf-8")
    docs = load_corpus(tmp_path)
    assert [d.id for d in docs] == ["a", "b"]

    (tmp_path / "corpus.json").write_text(json.dumps([
        {"id": "x", "path": "b.txt", "language": "fr", "origin": "ocr-text"},
        {"id": "y", "path": "a.txt"},
    ]), encoding="utf-8")
    docs = load_corpus(tmp_path)
    assert [(d.id, d.language, d.text) for d in docs] == [("x", "fr", "B"), ("y", "en", "A")]

    (tmp_path / "corpus.json").write_text(json.dumps([
        {"id": "x", "path": "a.txt"}, {"id": "x", "path": "b.txt"}]), encoding="utf-8")
    with pytest.raises(DuplicateId):
        load_corpus(tmp_path)


def test_csv_quoting_and_errors(tmp_path):
    p = tmp_path / "p.csv"
    p.write_text('id,name,blurb\n1,"Solar, lamp","Say ""hi""\nnow"\n\n2,Tent,x\n', encoding="utf-8")
    batch = load_csv_records(p, ("id", "name"))
    assert batch.column("name") == ["Solar, lamp", "Tent"]
    assert batch.records()[0]["blurb"] == 'Say "hi"\nnow'

    with pytest.raises(MissingColumn) as exc:
        load_csv_records(p, ("category",))
    assert exc.value.name == "category"

    p.write_text("a,b\n1,2\n3\n", encoding="utf-8")
    with pytest.raises(RaggedRow) as exc:
        load_csv_records(p)
    assert exc.value.line == 3

    p.write_text("", encoding="utf-8")
    with pytest.raises(ParseError):
        load_csv_records(p)


def test_batch_csv_round_trip(tmp_path):
    p = tmp_path / "p.csv"
    p.write_text('a,b\n"x,1","y""z"\n', encoding="utf-8")
    batch = load_csv_records(p)
    p.write_text(batch.to_csv(), encoding="utf-8")
    assert load_csv_records(p).rows == batch.rows


def test_species_ground_truth(tmp_path):
    p = tmp_path / "t.json"
    p.write_text(json.dumps({"kind": "species-set", "page": ["Rosa canina L."]}), encoding="utf-8")
    gt = load_ground_truth(p, "species-set")
    assert gt.payload["page"] == (SpeciesName("Rosa", "canina", authors="L."),)
    gt.check_keys(["page"])
    with pytest.raises(KeyError):
        gt.check_keys(["other"])
    with pytest.raises(KindMismatch):
        load_ground_truth(p, GroundTruthKind.NAICS_LABEL)


def test_naics_and_hta_ground_truth(tmp_path):
    p = tmp_path / "n.json"
    p.write_text(json.dumps({"ks-1": "3231", "ks-2": "32"}), encoding="utf-8")
    with pytest.raises(ParseError):
        load_ground_truth(p, "naics-label")

    record = {f: None for f in HTA_FIELDS}
    p.write_text(json.dumps({"doc": record}), encoding="utf-8")
    assert load_ground_truth(p, "hta-record").payload["doc"] == record
    del record["inn"]
    p.write_text(json.dumps({"doc": record}), encoding="utf-8")
    with pytest.raises(ParseError, match="missing=\\['inn'\\]"):
        load_ground_truth(p, "hta-record")


def test_shipped_truth_files_load(fixtures):
    assert len(load_ground_truth(fixtures / "seedlist" / "truth.json", "species-set").payload) == 4
    assert len(load_ground_truth(fixtures / "hta" / "truth.json", "hta-record").payload) == 3
