import io

import numpy as np
import pytest

from hamclf.data import (
    CsvFormatError, MaskedSample, TrainingArrays, mask_matrix, masks_from_matrix, read_test_csv,
    read_train_csv, to_csv_string, training_arrays, write_test_csv, write_train_csv,
)
from hamclf.lattice import Pattern


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestTrainCsv:
    def test_missing_encodings(self, tmp_path):
        data = read_train_csv(write(tmp_path, "t.csv", "x1,x2,y\n1.5,NA,1\n,2.5,0\n3,4,1\n"))
        assert data.d == 2
        assert data.masks.tolist() == [1, 2, 3]
        assert data.X.tolist() == [[1.5, 0.0], [0.0, 2.5], [3.0, 4.0]]
        assert data.y.tolist() == [1, 0, 1]

    @pytest.mark.parametrize("text, where", [
        ("x1,x2,y\n1,2,3\n", "row 2, column y"),
        ("x1,x2,y\n1,abc,0\n", "row 2, column x2"),
        ("x1,x2,y\n1,2,0\n1,2\n", "row 3"),
        ("a,b,y\n1,2,0\n", "row 1"),
        ("x1,x2,y\n1,inf,0\n", "column x2"),
        ("", "empty"),
        ("x1,y\n", "no data"),
    ])
    def test_errors_name_location(self, tmp_path, text, where):
        with pytest.raises(CsvFormatError, match=where):
            read_train_csv(write(tmp_path, "t.csv", text))

    def test_round_trip(self, tmp_path, rng):
        X = rng.random((20, 3))
        masks = rng.integers(0, 8, 20)
        seen = mask_matrix(masks, 3)
        data = TrainingArrays(np.where(seen, X, 0.0), rng.integers(0, 2, 20), masks, 3)
        text = to_csv_string(write_train_csv, data)
        assert "NA" in text
        back = read_train_csv(write(tmp_path, "r.csv", text))
        assert np.array_equal(back.X, data.X) and np.array_equal(back.masks, data.masks)
        assert np.array_equal(back.y, data.y)


class TestTestCsv:
    def test_reads(self, tmp_path):
        X = read_test_csv(write(tmp_path, "q.csv", "x1,x2\n1,2\n3,4\n"), d=2)
        assert X.tolist() == [[1.0, 2.0], [3.0, 4.0]]

    def test_na_is_an_error(self, tmp_path):
        with pytest.raises(CsvFormatError, match="row 3, column x1"):
            read_test_csv(write(tmp_path, "q.csv", "x1,x2\n1,2\nNA,4\n"))

    def test_dimension_mismatch(self, tmp_path):
        with pytest.raises(CsvFormatError, match="features"):
            read_test_csv(write(tmp_path, "q.csv", "x1\n1\n"), d=2)

    def test_write(self):
        buf = io.StringIO()
        write_test_csv(buf, np.array([[0.5, 1.0]]), [1])
        assert buf.getvalue() == "x1,x2,y\n0.5,1.0,1\n"


class TestSamples:
    def test_masked_sample_invariant(self):
        MaskedSample((1.0, 0.0), 1, Pattern.parse("10"))
        with pytest.raises(ValueError):
            MaskedSample((1.0, 2.0), 1, Pattern.parse("10"))
        with pytest.raises(ValueError):
            MaskedSample((1.0,), 2, Pattern.parse("1"))

    def test_conversion_round_trip(self):
        samples = [MaskedSample((1.0, 0.0), 1, Pattern.parse("10")),
                   MaskedSample((0.0, 2.0), 0, Pattern.parse("01"))]
        data = training_arrays(samples)
        assert data.samples() == samples

    def test_masks_matrix_round_trip(self, rng):
        masks = rng.integers(0, 16, 50)
        assert np.array_equal(masks_from_matrix(mask_matrix(masks, 4)), masks)
