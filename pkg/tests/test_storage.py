"""Tests for CSV / JSON output files."""

import numpy as np
import pytest

from errors import StorageError
from utils.storage import read_csv, read_json, write_csv, write_json

HASH = "0123abcd" * 8


def test_csv_round_trip_is_exact(tmp_path):
    values = np.array([0.1, 1.0 / 3.0, 2.0 ** -40, 1e300, np.nan])
    path = write_csv(
        tmp_path / "table.csv",
        ["t", "flag", "name"],
        {"t": values, "flag": [True, False, True, False, True], "name": ["a", "b", "c", "d", "e"]},
        HASH,
        metadata={"t_probe": 1.0},
    )

    table = read_csv(path)
    assert table.config_hash == HASH
    assert table.metadata["t_probe"] == "1.0"
    assert table.columns == ["t", "flag", "name"]
    np.testing.assert_array_equal(table["t"], values)
    np.testing.assert_array_equal(table["flag"], [1.0, 0.0, 1.0, 0.0, 1.0])
    assert list(table["name"]) == ["a", "b", "c", "d", "e"]


def test_csv_is_deterministic(tmp_path):
    data = {"t": np.linspace(0.0, 1.0, 7), "q": np.exp(np.linspace(0.0, 1.0, 7))}
    first = write_csv(tmp_path / "a.csv", ["t", "q"], data, HASH).read_bytes()
    second = write_csv(tmp_path / "b.csv", ["t", "q"], data, HASH).read_bytes()
    assert first == second
    assert b"\r" not in first
    assert first.splitlines()[0] == f"# config_hash: {HASH}".encode()


def test_csv_rejects_missing_or_ragged_columns(tmp_path):
    with pytest.raises(StorageError):
        write_csv(tmp_path / "x.csv", ["t", "q"], {"t": [0.0]}, HASH)
    with pytest.raises(StorageError):
        write_csv(tmp_path / "x.csv", ["t", "q"], {"t": [0.0], "q": [1.0, 2.0]}, HASH)


def test_csv_text_cells_are_quoted(tmp_path):
    errors = ["", "cell 1 failed: gamma=0.5, lambda=1.5", "said \"no\""]
    path = write_csv(tmp_path / "sweep.csv", ["index", "error"], {"index": [0, 1, 2], "error": errors}, HASH)

    table = read_csv(path)
    assert list(table["error"]) == errors
    np.testing.assert_array_equal(table["index"], [0.0, 1.0, 2.0])


def test_read_rejects_ragged_rows(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text(f"# config_hash: {HASH}\nt,q\n0,1\n1,2,3\n", encoding="utf-8")
    with pytest.raises(StorageError):
        read_csv(path)


def test_read_missing_file(tmp_path):
    with pytest.raises(StorageError) as excinfo:
        read_csv(tmp_path / "absent.csv")
    assert excinfo.value.exit_code == 4


def test_json_report(tmp_path):
    path = write_json(tmp_path / "report.json", {"values": np.arange(3), "rate": np.float64(0.5)}, HASH)
    document = read_json(path)
    assert document["config_hash"] == HASH
    assert document["values"] == [0, 1, 2]
    assert document["rate"] == 0.5


def test_json_rejects_unserializable(tmp_path):
    with pytest.raises(StorageError):
        write_json(tmp_path / "bad.json", {"value": object()}, HASH)
