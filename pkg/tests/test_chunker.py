import pytest

from oracles import effective_budget_oracle, token_estimate_oracle
from rdpipe.chunker import (
    Budget,
    OutputBudgetExceeded,
    OversizedUnit,
    TokenEstimatorConfig,
    check_output_budget,
    count_records,
    estimate_tokens,
    plan_chunks,
    split_units,
)
from rdpipe.ingest import SourceDocument


def test_estimate_matches_oracle():
    for cpt in (1.0, 2.5, 3.7, 4.0):
        cfg = TokenEstimatorConfig(chars_per_token=cpt)
        for n in range(0, 60):
            assert estimate_tokens("x" * n, cfg) == token_estimate_oracle(n, cpt)


def test_effective_budget_matches_oracle():
    for max_in, instr, margin in [(100, 0, 0.1), (150_000, 420, 0.1), (37, 36, 0.0), (1000, 3, 0.25)]:
        b = Budget(max_in, 10, instr)
        assert b.effective_input(TokenEstimatorConfig(safety_margin=margin)) == \
            effective_budget_oracle(max_in, instr, margin)


def test_invalid_settings():
    with pytest.raises(ValueError):
        TokenEstimatorConfig(chars_per_token=0)
    with pytest.raises(ValueError):
        TokenEstimatorConfig(safety_margin=1.0)
    with pytest.raises(ValueError):
        Budget(100, 10, instruction_tokens=100)
    with pytest.raises(ValueError):
        split_units("x", "sentence")


def test_blank_line_units_keep_gaps():
    text = "a\nb\n\n\nc\n  \nd"
    assert split_units(text, "blank-line") == ["a\nb\n\n\n", "c\n  \n", "d"]
    assert split_units("\n\nx\n", "blank-line") == ["\n\nx\n"]


def test_csv_rows_respect_quotes():
    text = '1,"a\nb",c\n2,"x ""y""",z\r\n3,q,r'
    assert split_units(text, "csv-row") == ['1,"a\nb",c\n', '2,"x ""y""",z\r\n', "3,q,r"]
    assert count_records(text, "csv-row") == 3
    assert count_records("a\n\n b\n  \n", "blank-line") == 2


def test_plan_is_lossless_and_bounded():
    text = "".join(f"{i:04d} Genus species{i} Auth.\n" + ("\n" if i % 3 == 0 else "") for i in range(40))
    doc = SourceDocument(id="page", text=text)
    cfg = TokenEstimatorConfig()
    budget = Budget(120, 400, instruction_tokens=20, per_record_output_tokens=50)
    plan = plan_chunks(doc, budget, cfg)
    assert plan.text() == text
    limit = effective_budget_oracle(120, 20, 0.1)
    for i, c in enumerate(plan):
        assert c.index == i
        assert text[c.start:c.end] == c.text
        assert c.estimated_tokens <= limit
        assert c.record_count_estimate <= 8
    assert len(plan) > 1
    assert "text" not in plan.to_dict()["chunks"][0]


def test_plan_is_deterministic():
    doc = SourceDocument(id="d", text="a b c\n\n" * 50)
    budget = Budget(40, 200, 5, 20)
    assert plan_chunks(doc, budget) == plan_chunks(doc, budget)


def test_oversized_unit_reports_position():
    doc = SourceDocument(id="d", text="short\n\n" + "x" * 500 + "\n")
    with pytest.raises(OversizedUnit) as exc:
        plan_chunks(doc, Budget(50, 100))
    assert exc.value.position == len("short\n\n")


def test_empty_document_has_no_chunks():
    assert len(plan_chunks(SourceDocument(id="d", text=""), Budget(10, 10))) == 0


def test_output_budget_check():
    doc = SourceDocument(id="d", text="a\nb\nc\n")
    chunk = plan_chunks(doc, Budget(100, 100, per_record_output_tokens=10), boundary="line").chunks[0]
    check_output_budget(chunk, Budget(100, 30, per_record_output_tokens=10))
    with pytest.raises(OutputBudgetExceeded):
        check_output_budget(chunk, Budget(100, 29, per_record_output_tokens=10))
