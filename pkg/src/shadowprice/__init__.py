"""Shadow prices and utility maximization under proportional transaction costs.

Finite scenario trees (hand-built or quantized from fractional Brownian
motion) carry the primal problem over buy/sell volumes and the dual problem
over consistent price systems; ``shadow`` reads the shadow price off the
dual optimizer and checks it against the primal one.
"""

__version__ = "0.1.0"

from .diagnostics import (HittingRule, TradingRule, arbitrage_demo, divergence_demo, f_lambda_curve,
                          stickiness_estimate)
from .dual import (ConsistentPriceSystem, DualMinimizer, DualSolution, conjugacy_check, dual_value_curve,
                   feasibility_margin, minimize_dual)
from .exceptions import (ConditioningError, FactorizationError, InfeasibleError, ParameterError, ResourceError,
                         ShadowPriceError, ShapeError, SolverError, VerificationError)
from .fbm import (FbmSpec, GaussianGrid, PathSet, conditional_increment, covariance, sample_cholesky,
                  sample_mvn)
from .market import (CostSpec, PriceModel, Strategy, is_admissible, liquidation_value, liquidation_values,
                     self_finance, total_variation)
from .primal import PrimalSolution, SolverConfig, UtilityMaximizer, indirect_utility_curve, maximize_utility
from .shadow import (ShadowPrice, VerificationReport, extract_shadow, girsanov_check, ito_coefficients,
                     touching_stats, verify_shadow)
from .tree import (ScenarioTree, binomial_tree, enumerate_paths, example_divergence_tree,
                   fbm_quantization_tree)
from .utility import UtilitySpec, exponential_utility

__all__ = [
    "ConditioningError", "ConsistentPriceSystem", "CostSpec", "DualMinimizer", "DualSolution",
    "FactorizationError", "FbmSpec", "GaussianGrid", "HittingRule", "InfeasibleError", "ParameterError",
    "PathSet", "PriceModel", "PrimalSolution", "ResourceError", "ScenarioTree", "ShadowPrice",
    "ShadowPriceError", "ShapeError", "SolverConfig", "SolverError", "Strategy", "TradingRule",
    "UtilityMaximizer", "UtilitySpec", "VerificationError", "VerificationReport", "arbitrage_demo",
    "binomial_tree", "conditional_increment", "conjugacy_check", "covariance", "divergence_demo",
    "dual_value_curve", "enumerate_paths", "example_divergence_tree", "exponential_utility",
    "extract_shadow", "f_lambda_curve", "fbm_quantization_tree", "feasibility_margin", "girsanov_check",
    "indirect_utility_curve", "is_admissible", "ito_coefficients", "liquidation_value", "liquidation_values",
    "maximize_utility", "minimize_dual", "sample_cholesky", "sample_mvn", "self_finance",
    "stickiness_estimate", "total_variation", "touching_stats", "verify_shadow",
]
