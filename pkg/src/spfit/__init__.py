"""Exponentially fitted backward Euler for ``eps u' + a(t) u = f(t)`` on non-uniform meshes."""

from .analysis import (ErrorTable, build_error_table, check_layer_bounds, check_sandwich,
                       fine_mesh_reference, nodal_error, uniform_order)
from .coefficients import BASIS, Coefficient, combine, constant
from .mesh import Mesh, graded_mesh, random_quasi_uniform_mesh, uniform_mesh, validate
from .problem import (CATALOG, ProblemSpec, SolutionFunction, continuous_decomposition,
                      exact_solution, get_problem, reduced_solution)
from .scheme import (DiscreteSolution, discrete_decompose, fitting_factor, solve)

__version__ = "0.1.0"
