import json

import pytest

from rdpipe.extraction import UnknownField
from rdpipe.ingest import HTA_FIELDS, SourceDocument
from rdpipe.prompting import PromptTemplate
from rdpipe.tasks.hta import (
    ConsistencyStatus,
    HtaTask,
    compare_runs,
    consistency_csv,
    jaccard,
    needs_translation_pass,
    normalize_date,
)


@pytest.mark.parametrize("text,iso", [
    ("2012-03-04", "2012-03-04"),
    ("04/03/2012", "2012-03-04"),
    ("03/24/2012", "2012-03-24"),
    ("4 March 2012", "2012-03-04"),
    ("1er février 2017", "2017-02-01"),
    ("15 augustus 2016", "2016-08-15"),
    ("March 4th, 2012", "2012-03-04"),
    (None, None),
])
def test_normalize_date(text, iso):
    assert normalize_date(text) == (iso, True)


def test_unparseable_date_is_kept():
    assert normalize_date("Q3 2015") == ("Q3 2015", False)
    assert normalize_date("31/02/2015") == ("31/02/2015", False)


def test_translation_needed():
    assert not needs_translation_pass("en")
    assert not needs_translation_pass("EN-gb")
    assert needs_translation_pass("fr")


def _record(**kw):
    rec = {f: "same" for f in HTA_FIELDS}
    rec.update(kw)
    return rec


def test_compare_runs_statuses():
    runs = [_record(indication="Angina."), _record(indication="angina"),
            _record(indication=" ANGINA ")]
    runs[2]["comparator"] = "placebo"
    reports = {r.field: r for r in compare_runs(runs)}
    assert reports["indication"].status is ConsistencyStatus.NORMALIZED
    assert reports["comparator"].status is ConsistencyStatus.DIVERGENT
    assert reports["comparator"].similarity == 0.0
    assert reports["inn"].status is ConsistencyStatus.CONSISTENT
    assert reports["inn"].similarity == 1.0
    with pytest.raises(ValueError):
        compare_runs(runs[:1])


def test_similarity_one_only_for_equal_values():
    # Divergent values can still share every word (reordered), so only the
    # forward direction holds: non-divergent implies similarity 1.0.
    runs = [_record(indication="not recommended"), _record(indication="recommended, not")]
    rep = {r.field: r for r in compare_runs(runs)}["indication"]
    assert rep.status is ConsistencyStatus.DIVERGENT and rep.similarity == 1.0
    for r in compare_runs([_record(), _record(inn=None)]):
        if r.status is not ConsistencyStatus.DIVERGENT:
            assert r.similarity == 1.0
    assert jaccard(None, None) == 1.0
    assert jaccard("a b", "b c") == pytest.approx(1 / 3)


def test_consistency_csv():
    text = consistency_csv({"d": compare_runs([_record(), _record()])})
    lines = text.splitlines()
    assert lines[0] == "doc_id,field,status,similarity,run1,run2"
    assert len(lines) == 15


class _Call:
    def __init__(self, reply):
        self.reply = reply
        self.seen = []

    def __call__(self, template, bindings):
        self.seen.append((template, bindings))
        return self.reply


def test_post_process_english_skips_translation():
    task = HtaTask()
    call = _Call({})
    out = task.post_process(SourceDocument("d", "x", language="en"), [_record(assessment_date="4 March 2012")], call)
    assert out[0]["assessment_date"] == "2012-03-04"
    assert call.seen == []


def test_post_process_translates_policy_fields_only():
    task = HtaTask()
    rec = _record(indication="Angor stable", inn="ivabradine", comparator=None, assessment_date="2012-01-01")
    call = _Call('{"indication": "Stable angina", "final_recommendation": "Reimbursed"}')
    out = task.post_process(SourceDocument("d", "x", language="fr"), [rec], call)[0]
    assert out["indication"] == "Stable angina"
    assert out["final_recommendation"] == "Reimbursed"
    assert out["inn"] == "ivabradine" and out["comparator"] is None
    template, bindings = call.seen[0]
    assert template is task.translate_template
    sent = json.loads(bindings["fields"])
    assert "inn" not in sent and "comparator" not in sent and sent["indication"] == "Angor stable"


def test_translation_reply_outside_policy_is_rejected():
    task = HtaTask()
    call = _Call({"inn": "x"})
    with pytest.raises(UnknownField):
        task.post_process(SourceDocument("d", "x", language="nl"), [_record()], call)


def test_custom_translation_policy():
    t = PromptTemplate("tr", "{fields} -> {target_language}", frozenset({"fields", "target_language"}))
    task = HtaTask(translate_template=t, translation_fields=("indication",))
    call = _Call({"indication": "EN"})
    out = task.post_process(SourceDocument("d", "x", language="nl"), [_record()], call)[0]
    assert out["indication"] == "EN" and out["comparator"] == "same"
