"""Tests for losses, residual maintenance and partial derivatives."""

import logging

import numpy as np
import pytest

from hydra_cd.errors import DimensionError, ZeroColumnError
from hydra_cd.loss import (
    LossKind,
    delta_g,
    init_residual,
    loss_value,
    loss_value_direct,
    m_diag,
    partial_derivative,
    partial_derivative_direct,
)
from hydra_cd.matrix import SparseMatrix

KINDS = [LossKind.SQUARE, LossKind.LOGISTIC, LossKind.SQUARE_HINGE]


def random_instance(kind, n=12, d=6, seed=0, density=0.6):
    rng = np.random.default_rng(seed)
    dense = rng.standard_normal((n, d)) * (rng.random((n, d)) < density)
    dense[rng.integers(n, size=d), np.arange(d)] = rng.standard_normal(d) + 3.0
    A = SparseMatrix.from_dense(dense)
    if kind is LossKind.SQUARE:
        y = rng.standard_normal(n)
    else:
        y = rng.choice([-1.0, 1.0], size=n)
    return A, y, rng


class TestLossKind:
    def test_parse_aliases(self):
        assert LossKind.parse("sl") is LossKind.SQUARE
        assert LossKind.parse("LL") is LossKind.LOGISTIC
        assert LossKind.parse("square-hinge") is LossKind.SQUARE_HINGE
        assert LossKind.parse("hinge") is LossKind.SQUARE_HINGE

    def test_parse_unknown(self):
        with pytest.raises(ValueError):
            LossKind.parse("huber")

    def test_curvature_scale(self):
        assert LossKind.LOGISTIC.curvature_scale == 0.25
        assert LossKind.SQUARE.curvature_scale == 1.0


class TestResidual:
    @pytest.mark.parametrize("kind", KINDS)
    def test_residual_definition(self, kind):
        """g = Ax - y for the square loss, -Diag(y) A x otherwise."""
        A, y, rng = random_instance(kind)
        x = rng.standard_normal(A.n_cols)
        g = init_residual(A, x, y, kind).g
        Ax = A.to_dense() @ x
        expected = Ax - y if kind is LossKind.SQUARE else -y * Ax
        assert np.allclose(g, expected)

    @pytest.mark.parametrize("kind", KINDS)
    def test_loss_value_matches_direct(self, kind):
        A, y, rng = random_instance(kind, seed=1)
        x = rng.standard_normal(A.n_cols)
        r = init_residual(A, x, y, kind)
        assert loss_value(r) == pytest.approx(loss_value_direct(A, x, y, kind), rel=1e-12)

    @pytest.mark.parametrize("kind", KINDS)
    def test_delta_g_tracks_updates(self, kind):
        """g(x + h) = g(x) + delta_g(h) for any set of coordinate moves."""
        A, y, rng = random_instance(kind, seed=2)
        x = rng.standard_normal(A.n_cols)
        updates = [(1, 0.3), (4, -1.2), (5, 2.0)]
        g = init_residual(A, x, y, kind).g
        x_new = x.copy()
        for i, h in updates:
            x_new[i] += h
        g_new = g + delta_g(updates, A, y, kind)
        assert np.allclose(g_new, init_residual(A, x_new, y, kind).g, atol=1e-12)

    def test_zero_labels_rejected_for_logistic(self):
        A, _, _ = random_instance(LossKind.LOGISTIC)
        y = np.ones(A.n_rows)
        y[3] = 0.0
        with pytest.raises(DimensionError):
            init_residual(A, np.zeros(A.n_cols), y, LossKind.LOGISTIC)

    def test_non_unit_labels_warn(self, caplog):
        A, _, _ = random_instance(LossKind.SQUARE_HINGE)
        y = np.full(A.n_rows, 2.0)
        with caplog.at_level(logging.WARNING, logger="hydra_cd.loss"):
            init_residual(A, np.zeros(A.n_cols), y, LossKind.SQUARE_HINGE)
        assert "+/-1" in caplog.text

    def test_wrong_label_length(self):
        A, y, _ = random_instance(LossKind.SQUARE)
        with pytest.raises(DimensionError):
            init_residual(A, np.zeros(A.n_cols), y[:-1], LossKind.SQUARE)

    def test_raw_vector_needs_kind(self):
        with pytest.raises(TypeError):
            loss_value(np.zeros(3))

    def test_zero_residual_square_loss(self):
        assert loss_value(np.zeros(4), LossKind.SQUARE) == 0.0

    def test_logistic_is_stable_for_large_margins(self):
        v = np.array([800.0, -800.0])
        assert loss_value(v, LossKind.LOGISTIC) == pytest.approx(800.0)


class TestCurvature:
    def test_m_diag(self):
        A = SparseMatrix.from_dense([[1.0, 2.0], [2.0, 0.0]])
        assert m_diag(A, LossKind.SQUARE).tolist() == [5.0, 4.0]
        assert m_diag(A, LossKind.LOGISTIC).tolist() == [1.25, 1.0]

    def test_zero_column_reported(self):
        A = SparseMatrix.from_dense([[1.0, 0.0, 1.0], [2.0, 0.0, 0.0]])
        with pytest.raises(ZeroColumnError) as exc:
            m_diag(A, LossKind.SQUARE)
        assert exc.value.columns == [1]

    def test_inactive_zero_column_allowed(self):
        A = SparseMatrix.from_dense([[1.0, 0.0, 1.0], [2.0, 0.0, 0.0]])
        diag = m_diag(A, LossKind.SQUARE, active=np.array([0, 2]))
        assert diag[1] == 0.0


class TestDerivatives:
    @pytest.mark.parametrize("kind", KINDS)
    def test_finite_differences(self, kind):
        """Central differences of f agree with f'_i read off the residual."""
        A, y, rng = random_instance(kind, seed=3)
        eps = 1e-6
        for _ in range(10):
            x = rng.standard_normal(A.n_cols)
            g = init_residual(A, x, y, kind)
            for i in range(A.n_cols):
                e = np.zeros(A.n_cols)
                e[i] = eps
                fd = (loss_value_direct(A, x + e, y, kind) - loss_value_direct(A, x - e, y, kind)) / (2 * eps)
                assert partial_derivative(i, g, A, y, kind) == pytest.approx(fd, rel=1e-5, abs=1e-6)

    @pytest.mark.parametrize("kind", KINDS)
    def test_matches_closed_form_in_x(self, kind):
        A, y, rng = random_instance(kind, seed=4)
        x = rng.standard_normal(A.n_cols)
        g = init_residual(A, x, y, kind).g
        for i in range(A.n_cols):
            assert partial_derivative(i, g, A, y, kind) == pytest.approx(
                partial_derivative_direct(i, A, x, y, kind), rel=1e-12, abs=1e-12
            )

    @pytest.mark.parametrize("kind", KINDS)
    def test_quadratic_upper_bound(self, kind):
        """f(x + h) <= f(x) + f'(x)^T h + 1/2 h^T M h with M = scale * A^T A."""
        A, y, rng = random_instance(kind, seed=5)
        dense = A.to_dense()
        M = kind.curvature_scale * dense.T @ dense
        for _ in range(200):
            x = rng.standard_normal(A.n_cols) * 2.0
            h = rng.standard_normal(A.n_cols) * rng.choice([0.01, 0.3, 3.0])
            g = init_residual(A, x, y, kind)
            grad = np.array([partial_derivative(i, g, A, y, kind) for i in range(A.n_cols)])
            f0 = loss_value_direct(A, x, y, kind)
            bound = f0 + grad @ h + 0.5 * h @ M @ h
            assert loss_value_direct(A, x + h, y, kind) <= bound + 1e-9 * (1.0 + abs(bound))

    def test_hinge_rows_on_kink_contribute_nothing(self):
        """A row with g = -1 sits on the kink and drops out of the derivative."""
        A = SparseMatrix.from_dense([[1.0], [1.0]])
        y = np.array([1.0, 1.0])
        g = np.array([-1.0, 0.0])
        assert partial_derivative(0, g, A, y, LossKind.SQUARE_HINGE) == -1.0
