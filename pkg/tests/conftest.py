import numpy as np
import pytest

from stagebo.problems import ProblemSpec


def _parabola_pair(x):
    """Biobjective toy: maximize (-x^2, -(x-1)^2); front is x in [0, 1]."""
    v = float(x[0])
    return np.array([-(v**2), -((v - 1.0) ** 2)]), np.zeros(0)


def _parabola_pair_constrained(x):
    y, _ = _parabola_pair(x)
    return y, np.array([float(x[0]) - 0.5])


def _parabola_front(n):
    x = np.linspace(0.0, 1.0, n)
    return np.column_stack([-(x**2), -((x - 1.0) ** 2)])


def _parabola_front_constrained(n):
    x = np.linspace(0.5, 1.0, n)
    return np.column_stack([-(x**2), -((x - 1.0) ** 2)])


@pytest.fixture
def toy_problem():
    return ProblemSpec(
        name="toy-parabolas",
        dim_x=1,
        dim_y=2,
        dim_c=0,
        bounds=np.array([[-2.0, 2.0]]),
        eval_fn=_parabola_pair,
        reference_point=np.array([-5.0, -5.0]),
        front_fn=_parabola_front,
    )


@pytest.fixture
def toy_constrained_problem():
    return ProblemSpec(
        name="toy-parabolas-constrained",
        dim_x=1,
        dim_y=2,
        dim_c=1,
        bounds=np.array([[-2.0, 2.0]]),
        eval_fn=_parabola_pair_constrained,
        reference_point=np.array([-5.0, -5.0]),
        front_fn=_parabola_front_constrained,
    )


@pytest.fixture
def toy_preference_problem():
    return ProblemSpec(
        name="toy-parabolas-preference",
        dim_x=1,
        dim_y=2,
        dim_c=0,
        bounds=np.array([[-2.0, 2.0]]),
        eval_fn=_parabola_pair,
        reference_point=np.array([-5.0, -5.0]),
        preference=np.array([[-0.6, -0.1], [-0.6, -0.1]]),
        front_fn=_parabola_front,
    )
