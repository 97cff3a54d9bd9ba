"""rewlab: quantitative analysis of probabilistic programs with rewards."""

from .extreal import ExtReal, INF, ONE, ZERO, exp_scaled, gpow
from .lang import (
    ParseError, Program, State, format_expr, free_vars, fresh_var, parse,
    parse_bexpr, parse_expr, pretty_print,
)
from .expectation import (
    StateGrid, evaluate, leq_on_grid, parse_bindings, parse_grid, simplify,
    substitute,
)
from .opsem import (
    BudgetExceededError, MarkovChain, enumerate_paths, expected_reward,
    mc_transform, runtime_distribution,
)
from .wpcalc import (
    CheckReport, check_bound, check_invariant, check_program, ert_kleene,
    ert_equivalence_check, kleene_iterates, unsound_counter_demo, wp_numeric,
    wp_symbolic,
)
from .transform import (
    TransformSpec, cdf, compose, compose_check, excess, ghost_bust,
    ghost_bust_check, identity, linear, mgf, moment, monotonicity_check,
    parse_spec, product, simplify_program, soundness_check, transform,
)
from .gadgets import GadgetSpec, apply_gadget, fdr_fixture, fdr_initial_state

__version__ = "0.1.0"
