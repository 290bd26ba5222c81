"""Tests for labeled matrices and the subsystem operations."""

import numpy as np
import pytest
from numpy.testing import assert_allclose
from pydantic import ValidationError

from pptdyn.exceptions import DimensionError, LabelError, NotHermitianError
from pptdyn.tensor import (
    DimSpec,
    LabeledMatrix,
    Norm,
    flip_operator,
    hermitian_eig,
    identity,
    is_psd,
    kron,
    link_kernel,
    link_product,
    maximally_mixed,
    merge,
    min_eigenvalue,
    partial_trace,
    partial_transpose,
    permute,
    relabel,
    schatten_norm,
    trace_over,
    unnormalized_max_entangled,
)


def random_hermitian(rng, spec: DimSpec) -> LabeledMatrix:
    d = spec.total_dim
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return LabeledMatrix(spec, (g + g.conj().T) / 2, hermitian=True)


def random_density(rng, spec: DimSpec) -> LabeledMatrix:
    d = spec.total_dim
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = g @ g.conj().T
    return LabeledMatrix(spec, rho / np.trace(rho).real, hermitian=True)


class TestDimSpec:
    def test_total_dim_and_lookup(self):
        spec = DimSpec.of(("A", 2), ("B", 3), ("C", 4))
        assert spec.total_dim == 24
        assert spec.labels == ("A", "B", "C")
        assert spec.dim("B") == 3
        assert spec.dim_of(("A", "C")) == 8

    def test_duplicate_labels_rejected(self):
        with pytest.raises(ValidationError):
            DimSpec.of(("A", 2), ("A", 2))

    def test_zero_dimension_rejected(self):
        with pytest.raises(ValidationError):
            DimSpec.of(("A", 0))

    def test_unknown_label(self):
        spec = DimSpec.of(("A", 2))
        with pytest.raises(LabelError):
            spec.index("Z")

    def test_subset_keeps_original_order(self):
        spec = DimSpec.of(("A", 2), ("B", 3), ("C", 4))
        assert spec.subset(("C", "A")).labels == ("A", "C")


class TestLabeledMatrix:
    def test_shape_must_match_spec(self):
        with pytest.raises(DimensionError):
            LabeledMatrix(DimSpec.of(("A", 2)), np.eye(3))

    def test_hermitian_flag_is_checked(self):
        with pytest.raises(NotHermitianError):
            LabeledMatrix(DimSpec.of(("A", 2)), [[0, 1], [0, 0]], hermitian=True)

    def test_entries_are_read_only(self):
        m = identity(DimSpec.of(("A", 2)))
        with pytest.raises(ValueError):
            m.entries[0, 0] = 5

    def test_arithmetic_requires_same_spec(self):
        a = identity(DimSpec.of(("A", 2)))
        b = identity(DimSpec.of(("B", 2)))
        with pytest.raises(DimensionError):
            a + b

    def test_complex_scalar_drops_hermitian_flag(self):
        a = identity(DimSpec.of(("A", 2)))
        assert (a * 2.0).hermitian
        assert not (a * 1j).hermitian


class TestPartialOperations:
    def test_partial_trace_of_product(self, rng):
        a = random_density(rng, DimSpec.of(("A", 2)))
        b = random_density(rng, DimSpec.of(("B", 3)))
        ab = kron(a, b)
        assert partial_trace(ab, ("A",)).allclose(a)
        assert trace_over(ab, ("A",)).allclose(b)

    def test_partial_trace_keeps_original_order(self, rng):
        spec = DimSpec.of(("A", 2), ("B", 2), ("C", 2))
        m = random_hermitian(rng, spec)
        assert partial_trace(m, ("C", "A")).labels == ("A", "C")

    def test_partial_transpose_is_involution(self, rng):
        spec = DimSpec.of(("A", 2), ("B", 3), ("C", 2))
        m = random_hermitian(rng, spec)
        twice = partial_transpose(partial_transpose(m, ("B", "C")), ("B", "C"))
        assert_allclose(twice.entries, m.entries, atol=1e-10)

    def test_full_transpose(self, rng):
        spec = DimSpec.of(("A", 2), ("B", 3))
        m = random_hermitian(rng, spec)
        assert_allclose(partial_transpose(m, ("A", "B")).entries, m.entries.T, atol=1e-12)

    def test_flip_partial_transpose_is_max_entangled(self):
        f = flip_operator(3)
        phi = unnormalized_max_entangled(("A", 3), ("B", 3))
        assert_allclose(partial_transpose(f, ("B",)).entries, phi.entries, atol=1e-12)

    def test_pt_of_max_entangled_has_negative_eigenvalue(self):
        phi = unnormalized_max_entangled(("A", 2), ("B", 2)) / 2
        assert is_psd(phi)
        assert min_eigenvalue(partial_transpose(phi, ("B",))) == pytest.approx(-0.5)

    def test_permute_round_trip(self, rng):
        spec = DimSpec.of(("A", 2), ("B", 3), ("C", 4))
        m = random_hermitian(rng, spec)
        p = permute(m, ("C", "A", "B"))
        assert p.labels == ("C", "A", "B")
        assert permute(p, ("A", "B", "C")).allclose(m)

    def test_permute_matches_kron_order(self, rng):
        a = random_density(rng, DimSpec.of(("A", 2)))
        b = random_density(rng, DimSpec.of(("B", 3)))
        assert permute(kron(a, b), ("B", "A")).allclose(kron(b, a))

    def test_merge_fuses_factors(self, rng):
        m = random_hermitian(rng, DimSpec.of(("A", 2), ("B", 3), ("C", 2)))
        fused = merge(m, [("X", ("A", "C")), ("Y", ("B",))])
        assert fused.spec.factors == (("X", 4), ("Y", 3))
        assert_allclose(fused.entries, permute(m, ("A", "C", "B")).entries)

    def test_partial_transpose_keeps_trace_and_frobenius_norm(self, rng):
        spec = DimSpec.of(("A", 2), ("B", 3))
        m = random_hermitian(rng, spec)
        pt = partial_transpose(m, ("B",))
        assert pt.trace() == pytest.approx(m.trace())
        assert schatten_norm(pt, Norm.FROBENIUS) == pytest.approx(schatten_norm(m, Norm.FROBENIUS))

    def test_trace_commutes_with_transpose_on_other_factors(self, rng):
        spec = DimSpec.of(("A", 2), ("B", 3), ("C", 2))
        m = random_hermitian(rng, spec)
        first = trace_over(partial_transpose(m, ("B",)), ("C",))
        second = partial_transpose(trace_over(m, ("C",)), ("B",))
        assert first.labels == second.labels == ("A", "B")
        assert_allclose(first.entries, second.entries, atol=1e-12)

    def test_relabel(self):
        m = maximally_mixed(DimSpec.of(("A", 2)))
        assert relabel(m, {"A": "Q"}).labels == ("Q",)


class TestLinkProduct:
    def test_disjoint_labels_give_tensor_product(self, rng):
        a = random_density(rng, DimSpec.of(("A", 2)))
        b = random_density(rng, DimSpec.of(("B", 2)))
        assert link_product(a, b).allclose(kron(a, b))

    def test_full_contraction_is_trace_of_product_with_transpose(self, rng):
        spec = DimSpec.of(("A", 2), ("B", 2))
        a = random_hermitian(rng, spec)
        b = random_hermitian(rng, spec)
        value = link_product(a, b).entries[0, 0]
        assert value == pytest.approx(np.trace(a.entries.T @ b.entries))

    def test_identity_wire_is_neutral(self, rng):
        phi = unnormalized_max_entangled(("A", 2), ("B", 2))
        rho = random_density(rng, DimSpec.of(("A", 2)))
        out = link_product(rho, phi)
        assert out.labels == ("B",)
        assert_allclose(out.entries, rho.entries, atol=1e-12)

    def test_shared_dimension_mismatch(self):
        a = identity(DimSpec.of(("A", 2)))
        b = identity(DimSpec.of(("A", 3)))
        with pytest.raises(DimensionError):
            link_product(a, b)

    def test_batched_kernel_matches_single(self, rng):
        spec = DimSpec.of(("A", 2), ("B", 2))
        other = random_hermitian(rng, DimSpec.of(("B", 2), ("C", 3)))
        batch = np.stack([random_hermitian(rng, spec).entries for _ in range(3)])
        res, out_spec = link_kernel(batch, spec, other)
        assert out_spec.labels == ("A", "C")
        for k in range(3):
            single = link_product(LabeledMatrix(spec, batch[k]), other)
            assert_allclose(res[k], single.entries, atol=1e-12)

    def test_kernel_at_subscript_limit(self):
        spec = DimSpec.of(*[(f"X{i}", 1) for i in range(25)])
        other = identity(DimSpec.of(("Y", 1)))
        res, out_spec = link_kernel(np.ones((1, 1)), spec, other)
        assert len(out_spec.labels) == 26
        assert res.shape == (1, 1)

    def test_kernel_beyond_subscript_limit(self):
        spec = DimSpec.of(*[(f"X{i}", 1) for i in range(26)])
        other = identity(DimSpec.of(("Y", 1)))
        with pytest.raises(DimensionError, match="54 einsum subscripts"):
            link_kernel(np.ones((1, 1)), spec, other)


class TestNorms:
    def test_flip_norms(self):
        f = flip_operator(2)
        assert schatten_norm(f, Norm.TRACE) == pytest.approx(4.0)
        assert schatten_norm(f, "operator") == pytest.approx(1.0)
        assert schatten_norm(f, Norm.FROBENIUS) == pytest.approx(2.0)

    def test_is_psd(self, rng):
        rho = random_density(rng, DimSpec.of(("A", 3)))
        assert is_psd(rho)
        assert not is_psd(rho * -1.0)

    def test_norm_ordering(self, rng):
        for dims in ((2,), (2, 3), (3, 3)):
            m = random_hermitian(rng, DimSpec.of(*zip("ABC", dims)))
            op = schatten_norm(m, Norm.OPERATOR)
            frob = schatten_norm(m, Norm.FROBENIUS)
            assert op <= frob + 1e-12
            assert frob <= schatten_norm(m, Norm.TRACE) + 1e-12


class TestHermitianEig:
    def test_pauli_z(self):
        w, _ = hermitian_eig(LabeledMatrix(DimSpec.of(("A", 2)), np.diag([1.0, -1.0])))
        assert_allclose(w, [1.0, -1.0])

    def test_flip(self):
        w, _ = hermitian_eig(flip_operator(2))
        assert_allclose(w, [1.0, 1.0, 1.0, -1.0], atol=1e-12)

    def test_identity(self):
        w, _ = hermitian_eig(identity(DimSpec.of(("A", 3))))
        assert_allclose(w, np.ones(3))

    def test_eigenvalues_sum_to_trace(self, rng):
        m = random_hermitian(rng, DimSpec.of(("A", 2), ("B", 3)))
        w, v = hermitian_eig(m)
        assert np.sum(w) == pytest.approx(m.trace().real)
        assert np.all(np.diff(w) <= 1e-12)
        assert_allclose(v @ np.diag(w) @ v.conj().T, m.entries, atol=1e-10)

    def test_non_hermitian_rejected(self):
        with pytest.raises(NotHermitianError):
            hermitian_eig(LabeledMatrix(DimSpec.of(("A", 2)), [[0, 1], [0, 0]]))
