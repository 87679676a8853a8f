"""Optimal dynamic, optimal static and simple pricing for finite-buffer tandem queues."""
from .ctmc import (PricingPolicy, StateSpace, SteadyState, batch_gains, blocking_probability,
                   build_generator,
                   enumerate_states, gain, solve_policy, solve_static, stationary_distribution)
from .errors import (BoundInapplicable, CapacityError, ConfigError, DomainError, NumericalError,
                     TandemPricingError)
from .market import (Empirical, Exponential, MarketModel, Normal, SystemConfig, Uniform,
                     potential_rate, survival, utilization)
from .mdp import policy_evaluation, policy_iteration, solve_dynamic, uniformize
from .qbd import bound_constants, compute_R, finite_blocking, infinite_buffer_distribution, qbd_blocks
from .simulation import (estimate_gain, generate_primitives, mhypo_path, tandem_path,
                         verify_coupling)
from .static import (optimal_static, simple_policy_gain, theorem1_lower_bound,
                     upper_bound_price)

__version__ = "0.1.0"
