import numpy as np
import pytest

from mplab import expressions as ex


def test_compile_and_evaluate():
    f = ex.compile_expr("1 + absx * sin(x1)", 2)
    x = np.array([[0.5, 2.0], [1.0, 0.0]])
    np.testing.assert_allclose(f(x), 1 + np.linalg.norm(x, axis=1) * np.sin(x[:, 0]))
    assert f(np.array([0.0, 3.0])) == 1.0


@pytest.mark.parametrize(
    "bad",
    ["__import__('os')", "x1.real", "x3", "lambda: 1", "[1]", "'a'", "open(1)", "x1 if x2 else 1", "sin(x=1)"],
)
def test_rejects_unsafe_or_unknown(bad):
    with pytest.raises(ex.ExpressionError):
        ex.compile_expr(bad, 2)


def test_substitute_scaled():
    src = "x1**2 + absx"
    scaled = ex.substitute_scaled(src, 2, 3.0)
    y = np.array([[0.3, -0.4], [1.0, 2.0]])
    np.testing.assert_allclose(ex.compile_expr(scaled, 2)(y), ex.compile_expr(src, 2)(3.0 * y))


def test_normalize_and_constant():
    assert ex.normalize(2, 3) == "2.0"
    assert ex.is_constant("2*pi", 2)
    assert not ex.is_constant("x2", 2)
