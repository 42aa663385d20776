import json
import math

import numpy as np
import pytest

from syscontagion.dataio import (
    IngestConfig,
    SpreadPanel,
    ingest,
    ingest_with_report,
    intensity_to_csv,
    parse_intensity_csv,
    parse_spreads_csv,
    spread_to_intensity,
    survival_from_intensity,
    write_text_atomic,
)
from syscontagion.estimation import pairwise_tau_matrix
from syscontagion.exceptions import ArgumentError, DomainError, IngestionError
from syscontagion.panel import IntensityPanel

START = np.datetime64("2020-01-01")


def _records(spreads, labels=("a", "b", "c"), skip=()):
    out = []
    for i, row in enumerate(spreads):
        for k, s in enumerate(row):
            if (i, labels[k]) not in skip:
                out.append((START + i, labels[k], float(s)))
    return out


def _spreads(m=40, d=3, seed=0):
    return np.random.default_rng(seed).uniform(50, 400, size=(m, d))


# -- conversions -----------------------------------------------------------------

def test_simple_rule_examples():
    assert spread_to_intensity(100, 0.0) == pytest.approx(0.01, rel=1e-15)
    assert spread_to_intensity(120, 0.4) == pytest.approx(0.02, rel=1e-15)
    assert spread_to_intensity(60, 0.4) == pytest.approx(0.01, rel=1e-15)
    assert spread_to_intensity(60) == spread_to_intensity(60, 0.4)


def test_simple_rule_domain():
    with pytest.raises(DomainError):
        spread_to_intensity(100, 1.0)
    with pytest.raises(DomainError):
        spread_to_intensity(-5, 0.4)
    with pytest.raises(DomainError):
        spread_to_intensity([100, np.nan], 0.4)


def test_survival_examples():
    assert survival_from_intensity(0.05, 0.0) == 1.0
    assert survival_from_intensity(0.02, 5) == pytest.approx(0.904837418, abs=1e-9)
    assert survival_from_intensity(0.2, 5) == pytest.approx(math.exp(-1), rel=1e-15)
    with pytest.raises(DomainError):
        survival_from_intensity(0.02, -1)
    with pytest.raises(DomainError):
        survival_from_intensity(0.0, 1)


# -- ingestion -------------------------------------------------------------------

def test_complete_input_has_no_drops():
    s = _spreads()
    panel, rep = ingest_with_report(SpreadPanel.from_records(_records(s)))
    assert panel.m == 40 and panel.entities == ("a", "b", "c")
    assert rep.dropped_dates == [] and rep.dates_kept == 40 and rep.rows_read == 120
    assert np.allclose(panel.values, s / 1e4 / 0.6, rtol=1e-15)


def test_missing_cell_drops_date():
    recs = _records(_spreads(), skip={(5, "b")})
    panel, rep = ingest_with_report(SpreadPanel.from_records(recs))
    assert panel.m == 39
    assert rep.dropped_dates == [str(START + 5)]
    assert rep.entities["a"]["dropped"] == 1 and rep.entities["b"]["dropped"] == 0
    assert START + 5 not in panel.dates


def test_forward_fill():
    s = _spreads()
    recs = _records(s, skip={(5, "b"), (6, "b"), (10, "c"), (11, "c"), (12, "c")})
    panel, rep = ingest_with_report(SpreadPanel.from_records(recs), IngestConfig(policy="ffill", max_gap=2))
    # the gap of 3 for "c" is filled twice and the third date still drops
    assert rep.dropped_dates == [str(START + 12)]
    assert rep.entities["b"]["filled"] == 2 and rep.entities["c"]["filled"] == 2
    j = list(panel.dates).index(START + 6)
    assert panel.values[j, 1] == spread_to_intensity(s[4, 1])


def test_affine_adjustment():
    s = np.full((40, 2), 120.0)
    panel = ingest(SpreadPanel.from_records(_records(s, ("a", "b"))), IngestConfig(scale=0.6))
    assert np.allclose(panel.values, 0.012, rtol=1e-14)
    with pytest.raises(DomainError):
        ingest(SpreadPanel.from_records(_records(s, ("a", "b"))), IngestConfig(shift=-1.0))


def test_insufficient_data():
    with pytest.raises(IngestionError, match="insufficient aligned data"):
        ingest(SpreadPanel.from_records(_records(_spreads(m=29))))
    with pytest.raises(IngestionError, match="insufficient"):
        ingest(SpreadPanel.from_records(_records(_spreads(d=1), ("a",))))
    with pytest.raises(IngestionError):
        ingest(SpreadPanel.from_records([]))


def test_duplicate_quote():
    recs = _records(_spreads(m=2))
    with pytest.raises(IngestionError, match="duplicate"):
        SpreadPanel.from_records(recs + [recs[0]])


def test_config_validation():
    with pytest.raises(DomainError):
        IngestConfig(recovery=1.0)
    with pytest.raises(ArgumentError):
        IngestConfig(policy="nearest")
    with pytest.raises(ArgumentError):
        IngestConfig(max_gap=-1)


def test_ingest_idempotent():
    recs = _records(_spreads(seed=3), skip={(7, "a")})
    once = ingest(SpreadPanel.from_records(recs))
    back = []
    for i, d in enumerate(once.dates):
        for k, e in enumerate(once.entities):
            back.append((d, e, once.values[i, k] * 0.6 * 1e4))
    twice = ingest(SpreadPanel.from_records(back))
    assert np.array_equal(once.dates, twice.dates)
    assert np.allclose(once.values, twice.values, rtol=1e-14)


def test_tau_equals_tau_on_survival_probabilities():
    panel = ingest(SpreadPanel.from_records(_records(_spreads(m=60, seed=4))))
    surv = IntensityPanel(panel.dates, panel.entities, survival_from_intensity(panel.values, 5.0))
    a = pairwise_tau_matrix(panel).entries
    b = pairwise_tau_matrix(surv).entries
    off = ~np.eye(3, dtype=bool)
    # survival is decreasing in intensity for both series, so the signs cancel
    assert np.array_equal(a[off], b[off])


def test_report_json():
    _, rep = ingest_with_report(SpreadPanel.from_records(_records(_spreads())))
    doc = json.loads(rep.to_json())
    assert doc["entities"]["c"] == {"rows_read": 40, "filled": 0, "dropped": 0}


# -- files -----------------------------------------------------------------------

def test_parse_spreads_csv():
    text = "date,entity,spread_bps\n2020-01-02,x,120\n2020-01-01,y,60.5\n"
    sp = parse_spreads_csv(text)
    assert len(sp) == 2 and list(sp.entities) == ["x", "y"]
    assert sp.dates[0] == np.datetime64("2020-01-02")
    assert len(parse_spreads_csv("")) == 0


@pytest.mark.parametrize(
    "text",
    [
        "date,name,spread_bps\n2020-01-01,x,1\n",
        "date,entity,spread_bps\n2020-13-01,x,1\n",
        "date,entity,spread_bps\n2020-01-01,x,abc\n",
        "date,entity,spread_bps\n2020-01-01,x,0\n",
        "date,entity,spread_bps\n2020-01-01,x\n",
    ],
)
def test_parse_spreads_rejects_bad_rows(text):
    with pytest.raises(IngestionError):
        parse_spreads_csv(text)


def test_intensity_csv_round_trip():
    panel = ingest(SpreadPanel.from_records(_records(_spreads(seed=8))))
    text = intensity_to_csv(panel)
    assert text.splitlines()[0] == "date,entity,intensity"
    back = parse_intensity_csv(text)
    assert back.entities == panel.entities
    assert np.array_equal(back.values, panel.values) and np.array_equal(back.dates, panel.dates)


def test_intensity_csv_must_be_rectangular():
    with pytest.raises(IngestionError):
        parse_intensity_csv("date,entity,intensity\n2020-01-01,a,0.1\n2020-01-01,b,0.1\n2020-01-02,a,0.1\n")
    with pytest.raises(IngestionError):
        parse_intensity_csv("")


def test_write_text_atomic(tmp_path):
    target = tmp_path / "sub" / "out.csv"
    write_text_atomic(target, "x\n")
    write_text_atomic(target, "y\n")
    assert target.read_text() == "y\n"
    assert [p.name for p in target.parent.iterdir()] == ["out.csv"]
