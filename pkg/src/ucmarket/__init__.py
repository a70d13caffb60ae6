"""Unit-commitment market toolkit: clearing, pricing, uplift elimination."""

from .dispatch import (Commitment, DispatchSolution, FixedDispatch,
                       balance_residuals, dispatch_fixed_commitment,
                       oracle_dispatch, solve_dispatch)
from .instance import (InstanceError, InstanceSchemaError, InstanceSyntaxError,
                       InstanceValidationError, MarketInstance, NetworkSpec,
                       ProducerSpec, Topology, Violation, parse_instance,
                       parse_instance_file, serialize_instance, validate)
from .pricing import (DualEvaluation, InfeasibleInstanceError, PriceMethod,
                      PriceSystem, chp_price, dual_value, duality_gap,
                      grid_scan_price, marginal_price, user_price)
from .profit import (FTR_ID, BestResponse, ConsistencyError, KinkGuardError,
                     ProfitEntry, ProfitReport, best_response,
                     ftr_best_response, profit_at_dispatch, standard_profit,
                     uplift_report)
from .redundant import (AggregatedComponent, ConstraintComponent, FtrComponent,
                        GammaChoice, GammaVariant, NuAnalysis, OffsetComponent,
                        ProducerComponent, RearrangementError, RedundantFamily,
                        VerificationReport, aggregate_constraints, build_family,
                        component_minimum, evaluate_component, nu_analysis,
                        rearrange_nonnegative, verify_proposition)
from .serialize import canonical_json, profit_report_csv

__all__ = [name for name in dir() if not name.startswith("_")]

__version__ = "0.1.0"
