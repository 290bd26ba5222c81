"""Tests for the conic program model, the real embedding and the cvxopt backend."""

import logging

import numpy as np
import pytest
from numpy.testing import assert_allclose

from pptdyn.exceptions import ProgramError, SolverError
from pptdyn.solver import (
    Block,
    BlockKind,
    ProgramBuilder,
    SolveStatus,
    dump_triplets,
    embed_hermitian,
    embed_matrix,
    extract_hermitian,
    feasibility,
    hermitian_basis,
    hermitian_coords,
    hermitian_from_coords,
    phase_one,
    scaled,
    solve,
    trace_map,
)

PAULI_Y = np.array([[0, -1j], [1j, 0]])


def eigen_program(c: np.ndarray, sense: str):
    """Optimize Tr[C X] over density matrices."""
    b = ProgramBuilder("eigen")
    b.psd("X", c.shape[0])
    b.equal("trace", {"X": trace_map}, [[1.0]])
    b.objective("X", c)
    return b.build(sense)


class TestHermitianCoordinates:
    def test_basis_is_orthonormal(self):
        basis = hermitian_basis(3)
        gram = np.einsum('aij,bji->ab', basis, basis)
        assert_allclose(gram, np.eye(9), atol=1e-12)

    def test_coords_invert(self, rng):
        g = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        h = (g + g.conj().T) / 2
        assert_allclose(hermitian_from_coords(hermitian_coords(h), 4), h, atol=1e-12)

    def test_coords_are_inner_products(self, rng):
        g = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        h = (g + g.conj().T) / 2
        expected = np.real(np.einsum('kij,ji->k', hermitian_basis(3), h))
        assert_allclose(hermitian_coords(h), expected, atol=1e-12)

    def test_embedding_of_pauli_y(self):
        w = np.linalg.eigvalsh(embed_matrix(PAULI_Y))
        assert_allclose(np.sort(w), [-1, -1, 1, 1], atol=1e-12)

    def test_embedding_is_symmetric_and_invertible(self, rng):
        g = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        h = (g + g.conj().T) / 2
        s = embed_matrix(h)
        assert_allclose(s, s.T)
        assert_allclose(extract_hermitian(s), h, atol=1e-12)


class TestProgramModel:
    def test_unknown_objective_block(self):
        b = ProgramBuilder("bad")
        b.psd("X", 2)
        b.objective("Y", np.eye(2))
        with pytest.raises(ProgramError):
            b.build("min")

    def test_duplicate_blocks(self):
        b = ProgramBuilder("bad")
        b.psd("X", 2)
        b.free("X", 2)
        with pytest.raises(ProgramError):
            b.build("min")

    def test_term_shape_must_match_target(self):
        b = ProgramBuilder("bad")
        b.psd("X", 2)
        b.equal("wrong", {"X": lambda x: x}, np.eye(3))
        with pytest.raises(ProgramError):
            b.build("min")

    def test_non_hermitian_objective(self):
        b = ProgramBuilder("bad")
        b.psd("X", 2)
        b.objective("X", [[0, 1], [0, 0]])
        with pytest.raises(ProgramError):
            b.build("min")

    def test_scalar_block_has_dimension_one(self):
        assert Block("t", BlockKind.NONNEG_SCALAR, 5).dim == 1

    def test_sizes(self):
        p = eigen_program(np.eye(3), "min")
        assert p.sizes() == {'blocks': 1, 'variables': 9, 'equality_rows': 1, 'largest_block': 3}

    def test_program_without_cones(self):
        b = ProgramBuilder("free_only")
        b.free("X", 1)
        b.equal("pin", {"X": lambda x: x}, [[1.0]])
        with pytest.raises(ProgramError):
            embed_hermitian(b.build("min"))

    def test_free_block_null_directions_are_reported(self, caplog):
        b = ProgramBuilder("gauge")
        b.psd("X", 2)
        b.free("Y", 2)
        b.equal("link", {"X": lambda x: x, "Y": lambda y: trace_map(y) * np.eye(2)}, np.eye(2))
        with caplog.at_level(logging.WARNING, logger="pptdyn.solver"):
            sf = embed_hermitian(b.build("min"))
        assert sf.free_null_dim == 3
        assert "unconstrained directions" in caplog.text

    def test_pinned_free_block(self):
        b = ProgramBuilder("pinned")
        b.psd("X", 2)
        b.free("Y", 2)
        b.equal("link", {"X": lambda x: x, "Y": scaled(-1.0)}, np.zeros((2, 2)))
        assert embed_hermitian(b.build("min")).free_null_dim == 0

    def test_dump_sections(self):
        text = dump_triplets(eigen_program(np.diag([1.0, 2.0]), "min"))
        lines = text.splitlines()
        assert lines[0] == "# pptdyn conic program"
        tags = [line.split()[0] for line in lines if line.split()[0] in {"c", "G", "h", "A", "b"}]
        assert tags == ["c", "G", "h", "A", "b"]
        assert "cones l=0 s=[4]" in text


class TestSolve:
    def test_min_eigenvalue(self, rng):
        g = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        c = (g + g.conj().T) / 2
        sol = solve(eigen_program(c, "min"))
        assert sol.status is SolveStatus.OPTIMAL
        assert sol.value == pytest.approx(np.linalg.eigvalsh(c)[0], abs=1e-5)
        assert np.trace(sol["X"]).real == pytest.approx(1.0, abs=1e-7)

    def test_max_eigenvalue(self):
        c = np.array([[1.0, 1j], [-1j, 1.0]])
        sol = solve(eigen_program(c, "max"))
        assert sol.optimal
        assert sol.value == pytest.approx(2.0, abs=1e-5)
        assert sol.gap <= 1e-6

    def test_complex_coupling_is_respected(self):
        # Off-diagonal imaginary parts only show up through the full Hermitian embedding.
        c = PAULI_Y
        sol = solve(eigen_program(c, "min"))
        assert sol.value == pytest.approx(-1.0, abs=1e-5)
        x = sol["X"]
        assert np.real(np.trace(c @ x)) == pytest.approx(-1.0, abs=1e-5)

    def test_nonnegative_scalar(self):
        # min t s.t. t = X_00 + 0.5, Tr X = 1, X ≥ 0, t ≥ 0
        b = ProgramBuilder("scalar")
        b.psd("X", 2)
        b.nonneg("t")
        b.equal("link", {"t": lambda t: t, "X": lambda x: -x[..., 0:1, 0:1]}, [[0.5]])
        b.equal("trace", {"X": trace_map}, [[1.0]])
        b.objective("t", [[1.0]])
        sol = solve(b.build("min"))
        assert sol.optimal
        assert sol.value == pytest.approx(0.5, abs=1e-5)
        assert sol["X"][0, 0].real == pytest.approx(0.0, abs=1e-5)

    def test_dependent_rows_are_dropped(self):
        b = ProgramBuilder("dependent")
        b.psd("X", 2)
        b.equal("trace", {"X": trace_map}, [[1.0]])
        b.equal("trace_twice", {"X": scaled(2.0, trace_map)}, [[2.0]])
        b.objective("X", np.diag([1.0, 3.0]))
        sf = embed_hermitian(b.build("min"))
        assert len(sf.keep) == 1
        assert not sf.inconsistent
        sol = solve(b.build("min"))
        assert sol.value == pytest.approx(1.0, abs=1e-5)

    def test_inconsistent_equalities(self):
        b = ProgramBuilder("inconsistent")
        b.psd("X", 2)
        b.equal("one", {"X": trace_map}, [[1.0]])
        b.equal("two", {"X": trace_map}, [[2.0]])
        sol = solve(b.build("min"))
        assert sol.status is SolveStatus.INFEASIBLE
        assert sol.solver_status == "inconsistent equalities"

    def test_negative_trace_is_infeasible(self):
        b = ProgramBuilder("negative_trace")
        b.psd("X", 2)
        b.equal("trace", {"X": trace_map}, [[-1.0]])
        sol = solve(b.build("min"))
        assert sol.status is SolveStatus.INFEASIBLE
        assert not sol.optimal

    def test_duals_are_reported(self):
        sol = solve(eigen_program(np.diag([2.0, 5.0]), "min"))
        assert "trace" in sol.duals
        assert abs(sol.duals["trace"][0, 0].real) == pytest.approx(2.0, abs=1e-5)


class TestFeasibility:
    def density_program(self, trace: float):
        b = ProgramBuilder("density")
        b.psd("X", 2)
        b.equal("trace", {"X": trace_map}, [[trace]])
        return b.build("min")

    def test_feasible_program(self):
        ok, cert = feasibility(self.density_program(1.0))
        assert ok
        assert cert.margin < 0
        assert np.min(np.linalg.eigvalsh(cert.point["X"])) >= -1e-6
        assert np.trace(cert.point["X"]).real == pytest.approx(1.0, abs=1e-5)

    def test_infeasible_program(self):
        ok, cert = feasibility(self.density_program(-1.0))
        assert not ok
        assert cert.margin == pytest.approx(0.5, abs=1e-5)

    def test_phase_one_adds_shift_and_floor(self):
        p1 = phase_one(self.density_program(1.0))
        names = [blk.name for blk in p1.blocks]
        assert names[-2:] == ["__shift", "__floor"]

    def test_objective_rejected(self):
        p = eigen_program(np.eye(2), "min")
        with pytest.raises(ProgramError):
            feasibility(p)

    def test_stalled_phase_one_raises(self):
        b = ProgramBuilder("density4")
        b.psd("X", 4)
        b.equal("trace", {"X": trace_map}, [[1.0]])
        b.equal("corner", {"X": lambda x: x[..., :2, :2]}, 0.25 * np.eye(2))
        with pytest.raises(SolverError) as info:
            feasibility(b.build("min"), max_iter=1)
        assert info.value.solution.status is SolveStatus.MAX_ITER
        assert info.value.dump.startswith("# pptdyn conic program")
