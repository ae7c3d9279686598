import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from proxygroups import data
from proxygroups.errors import (
    DataFormatError,
    DimensionMismatchError,
    DuplicateIdError,
    EmptyFileError,
    MalformedHeaderError,
    NonFiniteValueError,
    ValidationError,
)


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestEmbeddingCsv:
    def test_two_rows_d3(self, tmp_path):
        p = write(tmp_path / "e.csv", "id,e0,e1,e2\na,1,2,3\nb,4.5,-1,0\n")
        m = data.load_embeddings(p)
        assert m.n == 2 and m.d == 3
        assert m.ids == ("a", "b")
        assert np.allclose(m.values, [[1, 2, 3], [4.5, -1, 0]])

    def test_round_trip_identity(self, tmp_path):
        m = data.EmbeddingMatrix(ids=("x", "y"), values=np.array([[0.1, 0.2], [1e-9, 3.0]]))
        p = str(tmp_path / "rt.csv")
        data.save_embeddings(m, p)
        back = data.load_embeddings(p)
        assert back.ids == m.ids
        assert np.array_equal(back.values, m.values)

    def test_nan_cell_names_row(self, tmp_path):
        p = write(tmp_path / "bad.csv", "id,e0\na,1\nb,NaN\n")
        with pytest.raises(NonFiniteValueError, match="line 3"):
            data.load_embeddings(p)

    def test_unparseable_cell(self, tmp_path):
        p = write(tmp_path / "bad.csv", "id,e0\na,hello\n")
        with pytest.raises(NonFiniteValueError, match="e0"):
            data.load_embeddings(p)

    def test_malformed_header(self, tmp_path):
        p = write(tmp_path / "bad.csv", "sample,e0\na,1\n")
        with pytest.raises(MalformedHeaderError):
            data.load_embeddings(p)
        p2 = write(tmp_path / "bad2.csv", "id,e1,e0\na,1,2\n")
        with pytest.raises(MalformedHeaderError):
            data.load_embeddings(p2)

    def test_duplicate_id(self, tmp_path):
        p = write(tmp_path / "dup.csv", "id,e0\na,1\na,2\n")
        with pytest.raises(DuplicateIdError):
            data.load_embeddings(p)

    def test_dimension_mismatch(self, tmp_path):
        p = write(tmp_path / "dim.csv", "id,e0,e1\na,1,2\nb,3\n")
        with pytest.raises(DimensionMismatchError, match="line 3"):
            data.load_embeddings(p)

    def test_empty_file(self, tmp_path):
        p = write(tmp_path / "empty.csv", "")
        with pytest.raises(EmptyFileError):
            data.load_embeddings(p)

    def test_header_only(self, tmp_path):
        p = write(tmp_path / "h.csv", "id,e0\n")
        with pytest.raises(EmptyFileError):
            data.load_embeddings(p)

    def test_valid_file_loads_without_error(self, tmp_path):
        # negative fixture: nothing beyond the documented malformations rejected
        p = write(tmp_path / "ok.csv", "id,e0,e1\nweird id with spaces,1e-30,2\nb,-0.0,3\n")
        m = data.load_embeddings(p)
        assert m.n == 2


class TestFemb:
    def test_magic_bytes(self, tmp_path):
        m = data.EmbeddingMatrix(ids=("a",), values=np.array([[1.0, 2.0]]))
        p = str(tmp_path / "m.femb")
        data.save_embeddings(m, p)
        with open(p, "rb") as fh:
            assert fh.read(4) == b"FEMB"

    def test_payload_size_formula(self, tmp_path):
        n, d = 1000, 3072
        ids = tuple(f"s{i}" for i in range(n))
        rng = np.random.default_rng(0)
        m = data.EmbeddingMatrix(ids=ids, values=rng.standard_normal((n, d)))
        p = str(tmp_path / "big.femb")
        data.save_embeddings(m, p)
        # fixed header: magic(4) + version u32(4) + n u64(8) + d u64(8)
        expected = 4 + 4 + 8 + 8 + n * d * 4 + sum(2 + len(i.encode()) for i in ids)
        assert (tmp_path / "big.femb").stat().st_size == expected

    def test_round_trip_f32(self, tmp_path):
        values = np.array([[0.1, 0.2, 0.3]], dtype=np.float32).astype(np.float64)
        m = data.EmbeddingMatrix(ids=("a",), values=values)
        p = str(tmp_path / "rt.femb")
        data.save_embeddings(m, p)
        back = data.load_embeddings(p)
        assert np.array_equal(back.values, values)

    @settings(max_examples=30, deadline=None)
    @given(
        n=st.integers(1, 8),
        d=st.integers(1, 6),
        seed=st.integers(0, 2**32 - 1),
    )
    def test_round_trip_property(self, tmp_path_factory, n, d, seed):
        rng = np.random.default_rng(seed)
        values = rng.standard_normal((n, d)).astype(np.float32).astype(np.float64)
        ids = tuple(f"id{i:03d}" for i in range(n))
        m = data.EmbeddingMatrix(ids=ids, values=values)
        p = str(tmp_path_factory.mktemp("femb") / "x.femb")
        data.save_embeddings(m, p)
        back = data.load_embeddings(p)
        assert back.ids == ids
        assert np.array_equal(back.values, values)

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.femb"
        p.write_bytes(b"NOPE" + b"\0" * 40)
        with pytest.raises(MalformedHeaderError):
            data.load_embeddings(str(p))

    def test_truncated_values(self, tmp_path):
        m = data.EmbeddingMatrix(ids=("a", "b"), values=np.ones((2, 4)))
        p = tmp_path / "t.femb"
        data.save_embeddings(m, str(p))
        blob = p.read_bytes()
        p.write_bytes(blob[:30])
        with pytest.raises(DimensionMismatchError):
            data.load_embeddings(str(p))

    def test_unsupported_version(self, tmp_path):
        m = data.EmbeddingMatrix(ids=("a",), values=np.ones((1, 1)))
        p = tmp_path / "v.femb"
        data.save_embeddings(m, str(p))
        blob = bytearray(p.read_bytes())
        blob[4] = 9
        p.write_bytes(bytes(blob))
        with pytest.raises(MalformedHeaderError, match="version"):
            data.load_embeddings(str(p))

    def test_non_finite_rejected(self, tmp_path):
        import struct

        payload = struct.pack("<4sIQQ", b"FEMB", 1, 1, 1)
        payload += struct.pack("<f", float("inf"))
        payload += struct.pack("<H", 1) + b"a"
        p = tmp_path / "inf.femb"
        p.write_bytes(payload)
        with pytest.raises(NonFiniteValueError):
            data.load_embeddings(str(p))


class TestTypes:
    def test_empty_matrix_rejected(self):
        with pytest.raises(ValidationError):
            data.EmbeddingMatrix(ids=(), values=np.empty((0, 3)))

    def test_id_count_mismatch(self):
        with pytest.raises(ValidationError):
            data.EmbeddingMatrix(ids=("a",), values=np.ones((2, 2)))

    def test_assignment_contiguity(self):
        with pytest.raises(ValidationError):
            data.ClusterAssignment(ids=("a", "b"), labels=np.array([0, 2]))
        a = data.ClusterAssignment(ids=("a", "b", "c"), labels=np.array([0, 1, -1]))
        assert a.n_clusters == 2 and a.noise_count == 1

    def test_metadata_validation(self):
        with pytest.raises(ValidationError):
            data.SampleRecord(age=131)
        with pytest.raises(ValidationError):
            data.SampleRecord(gender="X")
        with pytest.raises(ValidationError):
            data.SampleRecord(label=2)
        assert data.SampleRecord(gender="F", age=0).age == 0

    def test_subset_take_sum(self):
        with pytest.raises(ValidationError):
            data.SubsetSelection(
                selected_ids=("a", "b"), per_cluster_take={0: 1}, seed=0, fraction=0.5
            )
        s = data.SubsetSelection(
            selected_ids=("a", "b"), per_cluster_take=None, seed=0, fraction=0.5
        )
        assert len(s) == 2


class TestMetadataCsv:
    def test_round_trip(self, tmp_path):
        table = data.MetadataTable(
            records={
                "a": data.SampleRecord(gender="F", age=30, label=1, prediction=0, score=0.25),
                "b": data.SampleRecord(),
            }
        )
        p = str(tmp_path / "m.csv")
        data.save_metadata(table, p)
        back = data.load_metadata(p)
        assert back.get("a") == table.get("a")
        assert back.get("b") == table.get("b")

    def test_empty_cells_absent(self, tmp_path):
        p = write(tmp_path / "m.csv", "id,gender,age,label,prediction,score\na,,,,,\n")
        table = data.load_metadata(p)
        r = table.get("a")
        assert r.gender is None and r.age is None and r.score is None

    def test_bad_age(self, tmp_path):
        p = write(tmp_path / "m.csv", "id,gender,age,label,prediction,score\na,F,999,,,\n")
        with pytest.raises(DataFormatError, match="line 2"):
            data.load_metadata(p)


class TestJoin:
    def _matrix(self, ids):
        return data.EmbeddingMatrix(ids=ids, values=np.ones((len(ids), 2)))

    def test_full_coverage(self):
        m = self._matrix(("a", "b"))
        t = data.MetadataTable(records={"a": data.SampleRecord(), "b": data.SampleRecord()})
        view = data.join(m, t)
        assert view.missing_in_metadata == () and view.extra_in_metadata == ()

    def test_one_missing(self):
        ids = tuple(f"i{k}" for k in range(10))
        m = self._matrix(ids)
        t = data.MetadataTable(records={i: data.SampleRecord() for i in ids[1:]})
        view = data.join(m, t)
        assert view.missing_in_metadata == (ids[0],)

    def test_disjoint(self):
        m = self._matrix(("a", "b"))
        t = data.MetadataTable(records={"z": data.SampleRecord()})
        view = data.join(m, t)
        assert view.missing_in_metadata == ("a", "b")
        assert view.extra_in_metadata == ("z",)
        assert view.record_for_row(0) is None


class TestCoordinatesAndSubsets:
    def test_coordinates_round_trip(self, tmp_path):
        c = data.ReducedCoordinates(ids=("a", "b"), coords=np.array([[1.0, 2.0], [3.5, -1.25]]))
        p = str(tmp_path / "c.csv")
        data.save_coordinates(c, p)
        back = data.load_coordinates(p)
        assert back.ids == c.ids
        assert np.array_equal(back.coords, c.coords)

    def test_assignment_round_trip(self, tmp_path):
        a = data.ClusterAssignment(ids=("a", "b", "c"), labels=np.array([0, -1, 1]))
        p = str(tmp_path / "a.csv")
        data.save_assignment(a, p)
        back = data.load_assignment(p)
        assert back.ids == a.ids
        assert np.array_equal(back.labels, a.labels)

    def test_subset_file(self, tmp_path):
        s = data.SubsetSelection(
            selected_ids=("b", "a"), per_cluster_take={0: 2}, seed=1, fraction=0.5
        )
        p = str(tmp_path / "s.csv")
        data.save_subset(s, {"a": 0, "b": 0}, p)
        assert data.load_subset_ids(p) == ("b", "a")
