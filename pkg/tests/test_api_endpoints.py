import random
from unittest.mock import patch

from fastapi.testclient import TestClient

from main import app


def _random_points(n=30, bound=1000, seed=0):
    rng = random.Random(seed)
    points = set()
    while len(points) < n:
        points.add((rng.randint(-bound, bound), rng.randint(-bound, bound)))
    return [list(pt) for pt in sorted(points)]


class TestHealthEndpoint:
    """Test cases for health endpoint."""

    def test_health_check_success(self):
        """Test successful health check."""
        with TestClient(app) as client:
            response = client.get("/api/v1/health")
            assert response.status_code == 200
            data = response.json()
            assert data["status"] == "healthy"
            assert data["service"] == "inverse-sieve"

    def test_root(self):
        """Test the root endpoint."""
        with TestClient(app) as client:
            response = client.get("/")
            assert response.status_code == 200
            assert response.json()["docs"] == "/docs"


class TestArithmeticEndpoints:
    """Test cases for heights and primes."""

    def test_projective_height(self):
        """Test H(4 : 6) = 3."""
        with TestClient(app) as client:
            response = client.post("/api/v1/arithmetic/height", json={"point": [4, 6], "projective": True})
            assert response.status_code == 200
            assert response.json()["height"] == {"value": "3"}

    def test_function_field_height(self):
        """Test H(1 : T^3 + 1) = 2^3 over F_2(T)."""
        with TestClient(app) as client:
            response = client.post("/api/v1/arithmetic/height",
                                   json={"field": "FqT:2", "point": [[1, 0, 0, 1]]})
            assert response.status_code == 200
            assert response.json()["height"] == {"q": 2, "k": 3}

    def test_zero_point(self):
        """Test that the zero point is rejected with 400."""
        with TestClient(app) as client:
            response = client.post("/api/v1/arithmetic/height", json={"point": [0, 0], "projective": True})
            assert response.status_code == 400
            assert "ZeroPoint" in response.json()["detail"]

    def test_primes(self):
        """Test the primes up to 10."""
        with TestClient(app) as client:
            response = client.post("/api/v1/arithmetic/primes", json={"Q": 10})
            assert response.status_code == 200
            data = response.json()
            assert data["count"] == 4
            assert [p["norm"] for p in data["primes"]] == [2, 3, 5, 7]

    def test_primes_validation(self):
        """Test that Q below 2 fails validation."""
        with TestClient(app) as client:
            response = client.post("/api/v1/arithmetic/primes", json={"Q": 1})
            assert response.status_code == 422

    def test_unknown_field(self):
        """Test that an unknown field descriptor fails validation."""
        with TestClient(app) as client:
            response = client.post("/api/v1/arithmetic/primes", json={"field": "R", "Q": 10})
            assert response.status_code == 422


class TestSieveEndpoints:
    """Test cases for the sieve audit."""

    def test_audit(self):
        """Test the audit of {0, ..., 9}."""
        with TestClient(app) as client:
            response = client.post("/api/v1/sieve/audit",
                                   json={"N": 10, "points": [[i] for i in range(10)], "Q": 5})
            assert response.status_code == 200
            audit = response.json()["audit"]
            assert audit["holds"]

    def test_duplicate_points(self):
        """Test that repeated points are rejected with 400."""
        with TestClient(app) as client:
            response = client.post("/api/v1/sieve/audit", json={"N": 10, "points": [[1], [1]], "Q": 5})
            assert response.status_code == 400

    def test_ragged_points(self):
        """Test that mixed dimensions fail validation."""
        with TestClient(app) as client:
            response = client.post("/api/v1/sieve/audit", json={"N": 10, "points": [[1], [1, 2]], "Q": 5})
            assert response.status_code == 422

    def test_bound_too_small(self):
        """Test that N = 2 is rejected with 400."""
        with TestClient(app) as client:
            response = client.post("/api/v1/sieve/audit", json={"N": 2, "points": [[1]], "Q": 5})
            assert response.status_code == 400


class TestSolverEndpoints:
    """Test cases for small solutions and lifts."""

    def test_siegel(self):
        """Test the small solution of x + y + z = 0."""
        with TestClient(app) as client:
            response = client.post("/api/v1/solvers/siegel", json={"rows": [[1, 1, 1]]})
            assert response.status_code == 200
            assert response.json()["solution"]["vector"] == ["1", "-1", "0"]

    def test_siegel_no_kernel(self):
        """Test that a full rank system is rejected with 400."""
        with TestClient(app) as client:
            response = client.post("/api/v1/solvers/siegel", json={"rows": [[1, 0], [0, 1]]})
            assert response.status_code == 400

    def test_siegel_unexpected_error(self):
        """Test that unexpected failures become 500."""
        with patch('api.routes.solvers.small_solution') as mock_solve:
            mock_solve.side_effect = RuntimeError("lattice reduction failed")
            with TestClient(app) as client:
                response = client.post("/api/v1/solvers/siegel", json={"rows": [[1, 1, 1]]})
                assert response.status_code == 500

    def test_lift(self):
        """Test the lift of (4 : 6)."""
        with TestClient(app) as client:
            response = client.post("/api/v1/solvers/lift", json={"point": [4, 6]})
            assert response.status_code == 200
            assert response.json() == {"lift": ["2", "3"], "height": {"value": "3"}}


class TestReconstructEndpoint:
    """Test cases for reconstruction."""

    def test_small_set(self):
        """Test 30 random points with N = 1000."""
        with TestClient(app) as client:
            response = client.post("/api/v1/reconstruct", json={"N": 1000, "points": _random_points()})
            assert response.status_code == 200
            assert response.json()["outcome"]["kind"] == "Small"

    def test_parabola(self):
        """Test recovery of y = x^2 + 3x + 1."""
        points = [[x, x * x + 3 * x + 1] for x in range(-1000, 1001)]
        with TestClient(app) as client:
            response = client.post("/api/v1/reconstruct",
                                   json={"N": 1003001, "points": points, "mode": "pragmatic"})
            assert response.status_code == 200
            outcome = response.json()["outcome"]
            assert outcome["kind"] == "Structured"
            assert outcome["poly"]["degree"] == 2

    def test_invalid_mode(self):
        """Test that an unknown constant mode fails validation."""
        with TestClient(app) as client:
            response = client.post("/api/v1/reconstruct",
                                   json={"N": 1000, "points": [[1, 2]], "mode": "loose"})
            assert response.status_code == 422
