import numpy as np
import pytest

from coherence_scope.exceptions import ValidationError
from coherence_scope.ghz import GhzResultRow
from coherence_scope.qudit import QuditResultRow
from coherence_scope.sampling import binomial_stderr, derive_rng, ordered_map, sample_shots, stream_key
from coherence_scope.tables import read_rows, rows_to_csv, write_rows


def test_streams_are_reproducible_and_distinct():
    a = derive_rng(3, "channel", "X", 4).random(5)
    assert np.array_equal(a, derive_rng(3, "channel", "X", 4).random(5))
    assert not np.array_equal(a, derive_rng(3, "channel", "Y", 4).random(5))
    assert not np.array_equal(a, derive_rng(3, "gate", "X", 4).random(5))
    assert not np.array_equal(a, derive_rng(3, "channel", "X", 4, frame=1).random(5))
    assert stream_key("channel", "Z", 2) == stream_key("channel", 2, 2)


def test_negative_seed_rejected():
    with pytest.raises(ValidationError):
        derive_rng(-1, "channel")


def test_sample_shots_edges():
    assert sample_shots(0.0, 100, 0) == 0
    assert sample_shots(1.0, 100, 0) == 100
    with pytest.raises(ValidationError):
        sample_shots(1.2, 10, 0)


def test_binomial_stderr():
    assert binomial_stderr(25, 100) == pytest.approx(np.sqrt(0.25 * 0.75 / 100))


def test_ordered_map_preserves_order():
    assert ordered_map(lambda x: x * x, range(20), jobs=4) == [x * x for x in range(20)]


def test_csv_round_trip_is_exact(tmp_path):
    rows = [GhzResultRow("X", 2, 0, None, 0.1 + 0.2, 0.0), GhzResultRow("Z", 4, 100, 7, 0.07, 0.0255)]
    path = tmp_path / "r.csv"
    write_rows(path, rows)
    assert path.read_text().splitlines()[0] == "basis,n,shots,error_count,p_error,stderr"
    assert read_rows(path, GhzResultRow) == rows


def test_qudit_csv_header(tmp_path):
    rows = [QuditResultRow(3, 1, 0, 0, 1, 2, 0, None, 0.01, 0.0)]
    assert rows_to_csv(rows).splitlines()[0] == "d,P_a,P_b,Q_a,Q_b,n,shots,error_count,p_error,stderr"


def test_csv_missing_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("basis,n\nX,2\n")
    with pytest.raises(ValidationError, match="missing CSV columns"):
        read_rows(path, GhzResultRow)
