import numpy as np
import pytest

from hfield.core import (
    FieldFormatError,
    FieldRealization,
    GeneratorTag,
    GridSpec,
    HurstIndex,
    MultiIndex,
    NanPayloadError,
    OffGridError,
    TruncatedFieldError,
    cell_increments,
    generalized_increment,
    increment_over_rectangle,
    read_field,
    write_field,
    write_field_csv,
)
from hfield.randgen import RngStream, brownian_sheet_values


def make_field(values, origin=None, extent=None, hurst=None, **kw):
    values = np.asarray(values, dtype=float)
    d = values.ndim
    grid = GridSpec(
        origin or (0.0,) * d,
        extent or (1.0,) * d,
        tuple(n - 1 for n in values.shape),
    )
    return FieldRealization(
        grid=grid,
        values=values,
        hurst=hurst or HurstIndex((0.75,) * d, 1),
        seed=0,
        generator_tag=GeneratorTag.GAUSSIAN_EXACT,
        **kw,
    )


class TestMultiIndex:
    def test_componentwise_ops(self):
        a = MultiIndex.of(2.0, 3.0)
        b = MultiIndex.of(4.0, 6.0)
        assert (a * b).entries == (8.0, 18.0)
        assert (b / a).entries == (2.0, 2.0)
        assert (a + 1).entries == (3.0, 4.0)

    def test_powprod_is_scalar_product_power(self):
        a = MultiIndex.of(2.0, 3.0)
        assert a.powprod((2.0, 1.0)) == pytest.approx(12.0)
        assert a.prod() == 6.0

    def test_strict_componentwise_order(self):
        assert MultiIndex.of(1, 2) < MultiIndex.of(2, 3)
        assert not MultiIndex.of(1, 4) < MultiIndex.of(2, 3)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            MultiIndex.of(1.0, 2.0) + MultiIndex.of(1.0, 2.0, 3.0)

    def test_needs_entries(self):
        with pytest.raises(ValueError):
            MultiIndex(())


class TestHurstIndex:
    @pytest.mark.parametrize("bad", [0.5, 1.0, 0.49, 1.2])
    def test_open_interval_enforced(self, bad):
        with pytest.raises(ValueError):
            HurstIndex((bad,), 1)

    def test_q_must_be_positive_integer(self):
        with pytest.raises(ValueError):
            HurstIndex((0.75,), 0)
        with pytest.raises(ValueError):
            HurstIndex((0.75,), -2)


class TestGridSpec:
    def test_widths_and_nodes(self):
        g = GridSpec((0.0, 1.0), (2.0, 1.0), (4, 2))
        assert np.allclose(g.widths, [0.5, 0.5])
        assert g.node_counts == (5, 3)
        assert np.allclose(g.axis_nodes(0), [0, 0.5, 1, 1.5, 2])

    def test_node_index_refuses_off_node(self):
        g = GridSpec((0.0,), (1.0,), (4,))
        assert g.node_index((0.75,)) == (3,)
        with pytest.raises(OffGridError):
            g.node_index((0.3,))

    def test_zero_cells_requires_zero_extent(self):
        GridSpec((0.0,), (0.0,), (0,))
        with pytest.raises(ValueError):
            GridSpec((0.0,), (1.0,), (0,))
        with pytest.raises(ValueError):
            GridSpec((0.0,), (0.0,), (2,))


class TestGeneralizedIncrement:
    def test_d1_closed_form(self):
        assert generalized_increment([1.0, 4.0]) == pytest.approx(3.0)

    def test_d2_closed_form(self):
        # lexicographic corners: (s1,s2), (s1,t2), (t1,s2), (t1,t2)
        x00, x01, x10, x11 = 1.0, 2.0, 3.0, 10.0
        assert generalized_increment([x00, x01, x10, x11]) == pytest.approx(
            x11 - x10 - x01 + x00
        )

    @pytest.mark.parametrize("d", [1, 2, 3, 4])
    def test_constant_corners_cancel(self, d):
        assert generalized_increment([3.7] * 2**d) == 0.0

    def test_bad_corner_count(self):
        with pytest.raises(ValueError):
            generalized_increment([1.0, 2.0, 3.0])

    def test_bilinear_in_corners(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=8)
        b = rng.normal(size=8)
        lhs = generalized_increment(2.5 * a - b)
        rhs = 2.5 * generalized_increment(a) - generalized_increment(b)
        assert lhs == pytest.approx(rhs, abs=1e-14)


class TestIncrementOverRectangle:
    def test_degenerate_rectangle_is_zero(self):
        f = make_field(np.arange(25.0).reshape(5, 5))
        assert increment_over_rectangle(f, (0.25, 0.5), (0.25, 0.5)) == 0.0

    def test_split_additivity_d2(self):
        rng = np.random.default_rng(1)
        f = make_field(rng.normal(size=(5, 5)), extent=(2.0, 2.0))
        whole = increment_over_rectangle(f, (0.0, 0.0), (2.0, 2.0))
        parts = sum(
            increment_over_rectangle(f, (a, b), (a + 1.0, b + 1.0))
            for a in (0.0, 1.0)
            for b in (0.0, 1.0)
        )
        assert whole == pytest.approx(parts, abs=1e-12)

    def test_axis_split_property_random_boxes(self):
        rng = np.random.default_rng(2)
        f = make_field(rng.normal(size=(9, 9)))
        lo, mid, hi = 0.125, 0.5, 0.875
        whole = increment_over_rectangle(f, (lo, lo), (hi, hi))
        left = increment_over_rectangle(f, (lo, lo), (mid, hi))
        right = increment_over_rectangle(f, (mid, lo), (hi, hi))
        assert whole == pytest.approx(left + right, abs=1e-12)

    def test_refuses_interpolation(self):
        f = make_field(np.zeros((5, 5)))
        with pytest.raises(OffGridError):
            increment_over_rectangle(f, (0.0, 0.0), (0.3, 0.5))

    def test_white_noise_cell_increment_variance(self):
        # increments of the Brownian sheet over one cell: var = cell volume
        grid = GridSpec((0.0, 0.0), (1.0, 1.5), (2, 3))
        vol = grid.cell_volume()
        n = 10_000
        samples = np.empty(n)
        for rep in range(n):
            vals = brownian_sheet_values(grid, RngStream(42, rep))
            samples[rep] = cell_increments(vals)[1, 2]
        est = samples.var()
        se = est * np.sqrt(2.0 / n)
        assert abs(est - vol) < 3 * se


class TestFieldIO:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        f = make_field(rng.normal(size=(4, 7)), extent=(1.0, 2.0), time_axis=0)
        path = tmp_path / "f.hfld"
        write_field(f, path)
        g = read_field(path)
        assert g.values.tobytes() == f.values.tobytes()
        assert g.grid == f.grid
        assert g.hurst == f.hurst
        assert g.seed == f.seed
        assert g.generator_tag == f.generator_tag
        assert g.time_axis == 0

    def test_single_node_grid_round_trips(self, tmp_path):
        grid = GridSpec((0.0,), (0.0,), (0,))
        f = FieldRealization(grid, np.array([1.5]), HurstIndex((0.6,), 2), 9, GeneratorTag.KERNEL)
        path = tmp_path / "tiny.hfld"
        write_field(f, path)
        g = read_field(path)
        assert g.values.tolist() == [1.5]
        assert g.hurst.q == 2

    def test_corrupt_magic_is_format_error(self, tmp_path):
        f = make_field(np.zeros((3,)))
        path = tmp_path / "f.hfld"
        write_field(f, path)
        raw = bytearray(path.read_bytes())
        raw[:4] = b"XXXX"
        path.write_bytes(bytes(raw))
        with pytest.raises(FieldFormatError):
            read_field(path)

    def test_truncated_payload(self, tmp_path):
        f = make_field(np.zeros((5,)))
        path = tmp_path / "f.hfld"
        write_field(f, path)
        raw = path.read_bytes()
        path.write_bytes(raw[:-9])
        with pytest.raises(TruncatedFieldError):
            read_field(path)

    def test_nan_payload_rejected_on_read(self, tmp_path):
        f = make_field(np.zeros((3,)))
        path = tmp_path / "f.hfld"
        write_field(f, path)
        raw = bytearray(path.read_bytes())
        raw[-8:] = np.array([np.nan]).tobytes()
        path.write_bytes(bytes(raw))
        with pytest.raises(NanPayloadError):
            read_field(path)

    def test_nan_rejected_at_construction(self):
        with pytest.raises(NanPayloadError):
            make_field([0.0, np.nan, 1.0])

    def test_zero_hyperplane_values(self):
        vals = brownian_sheet_values(GridSpec((0.0, 0.0), (1.0, 1.0), (3, 3)), RngStream(0, 0))
        assert np.all(vals[0, :] == 0.0)
        assert np.all(vals[:, 0] == 0.0)

    def test_csv_export(self, tmp_path):
        f = make_field(np.arange(9.0).reshape(3, 3))
        path = tmp_path / "f.csv"
        write_field_csv(f, path)
        lines = path.read_text().splitlines()
        assert len(lines) == 9
        first = lines[0].split(",")
        assert [float(x) for x in first] == [0.0, 0.0, 0.0]
        assert float(lines[-1].split(",")[-1]) == 8.0

    def test_values_are_immutable(self):
        f = make_field(np.zeros((3,)))
        with pytest.raises(ValueError):
            f.values[0] = 1.0
