import pytest

from arithmetic.field import GlobalField
from arithmetic.polynomials import Polynomial
from exceptions import ChainInvalid
from solvers.noether import (
    Hypersurface, complement_small_basis, fiber_audit, noether_normalize, point_off_hypersurface,
    sample_variety_points,
)
from solvers.siegel import matrix_rank

Q = GlobalField.rational()


def _variables(n):
    return [Polynomial.variable(Q, n, i) for i in range(n)]


@pytest.fixture
def conic():
    x0, x1, x2 = _variables(3)
    return Hypersurface(x0 * x0 + x1 * x1 - x2 * x2)


class TestHypersurface:
    """Test cases for hypersurfaces and off-points."""

    def test_rejects_inhomogeneous(self):
        """Test that x0^2 + x1 does not define a hypersurface."""
        x0, x1 = _variables(2)
        with pytest.raises(ChainInvalid):
            Hypersurface(x0 * x0 + x1)

    def test_off_point(self):
        """Test the first scan point off x0 x1 = 0."""
        x0, x1, _ = _variables(3)
        assert point_off_hypersurface(Hypersurface(x0 * x1)) == (1, 1, 0)

    def test_sample_points_lie_on_conic(self, conic):
        """Test that sampled points satisfy the equation."""
        points = sample_variety_points(conic, 5)
        assert points
        assert all(conic.contains(y) for y in points)
        assert (3, 4, 5) in points


class TestComplement:
    """Test cases for complementary linear forms."""

    def test_complement_of_two_three(self):
        """Test the single form 3 X0 - 2 X1 vanishing at (2 : 3)."""
        (form,) = complement_small_basis(Q, (2, 3))
        assert form((1, 0)) == 3 and form((0, 1)) == -2

    def test_complement_of_diagonal(self):
        """Test the form X0 - X1 vanishing at (1 : 1)."""
        (form,) = complement_small_basis(Q, (1, 1))
        assert form((1, 0)) == 1 and form((0, 1)) == -1

    def test_complement_spans(self):
        """Test that the point and its complement are independent."""
        x = (1, 2, 3)
        forms = complement_small_basis(Q, x)
        assert len(forms) == 2
        assert all(form(x) == 0 for form in forms)
        rows = [[form((1, 0, 0)), form((0, 1, 0)), form((0, 0, 1))] for form in forms]
        assert matrix_rank(Q, [list(x)] + rows) == 3

    def test_zero_point(self):
        """Test that the zero tuple has no complement."""
        with pytest.raises(ValueError):
            complement_small_basis(Q, (0, 0))


class TestNoetherNormalize:
    """Test cases for composed projections."""

    def test_conic(self, conic):
        """Test the projection of the unit conic to P^1."""
        samples = sample_variety_points(conic, 6, 50)
        nmap = noether_normalize(Q, 2, [conic], samples=samples)
        assert nmap.dim == 1 and nmap.steps == 1
        assert matrix_rank(Q, nmap.coefficient_rows()) == 2
        assert all(nmap.image(y) is not None for y in samples)
        assert nmap.audit["holds"]
        assert nmap.audit["max_fibre"] <= 2
        assert nmap.to_dict()["dim"] == 1

    def test_empty_chain_is_identity(self):
        """Test that no chain steps keep every coordinate."""
        nmap = noether_normalize(Q, 2, [])
        assert nmap((1, 2, 3)) == (1, 2, 3)
        assert nmap.constant == 1.0

    def test_target_dimension(self, conic):
        """Test the dimension check against the chain length."""
        with pytest.raises(ChainInvalid):
            noether_normalize(Q, 2, [conic], target_dim=0)

    def test_wrong_variable_count(self):
        """Test that step polynomials must live in the current space."""
        x0, x1 = _variables(2)
        with pytest.raises(ChainInvalid):
            noether_normalize(Q, 2, [Hypersurface(x0 * x1)])

    def test_sample_off_variety(self, conic):
        """Test that samples must satisfy the step polynomial."""
        with pytest.raises(ChainInvalid):
            noether_normalize(Q, 2, [conic], samples=[(1, 1, 1)])

    def test_line_root_audit(self, conic):
        """Test that each sampled line meets the conic in at most two points."""
        nmap = noether_normalize(Q, 2, [conic])
        audit = fiber_audit(nmap, conic, [(3, 4, 5), (1, 0, 1)])
        assert audit["method"] == "line-roots"
        assert audit["samples"] == 2 and audit["holds"]
        assert audit["max_fibre"] == 2
