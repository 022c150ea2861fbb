"""Numerical weak-KAM toolkit for polysystems of exact twist maps.

The package discretizes the circle, represents one-step actions as
min-plus (tropical) cost matrices, and builds the standard weak-KAM
objects on top: Mather alpha-functions as tropical eigenvalues, Peierls
barriers as tropical closures, weak-KAM solutions as Lax-Oleinik fixed
points, and Aubry sets as contact sets.  For families of twist maps it
probes the forcing-direction dichotomy (common invariant circle versus
full local drift) and, on the drift side, produces self-certifying
momentum-drifting polyorbits.
"""

from .errors import (
    ArcTooShort,
    Blocked,
    CohomologyMismatch,
    ConfigError,
    DiffusionStalled,
    GridMismatch,
    InvalidScalar,
    LiftWindowTooSmall,
    MapSolveFailed,
    NoGap,
    NotBacktrackable,
    NotFixed,
    NotStabilized,
    PolykamError,
    StepTooSmall,
    Unresolved,
)
from .mechanism import (
    DiffusionResult,
    MechanismStep,
    PolyOrbit,
    diffuse,
    gap_arc,
    mechanism_step,
    relax_chain,
    verify_polyorbit,
)
from .models import (
    LagrangianSpec,
    PhasePoint,
    TwistGenerator,
    apply_map,
    build_cost_lagrangian,
    build_cost_twist,
    build_cost_twist_auto,
    cylinder_distance,
    family_costs,
)
from .pseudograph import (
    BumpForm,
    Pseudograph,
    bump_form,
    cost_semiconcavity,
    is_c11_graph,
    pseudograph_sum,
    semiconcavity_constant,
    wedge,
    wedge_graph,
)
from .tropical import (
    ArgminSet,
    CostMatrix,
    GridFunction,
    GridSpec,
    PeierlsBarrier,
    argmin_front,
    compose_costs,
    dual_lax_oleinik,
    lax_oleinik,
    peierls_closure,
    tropical_eigenvalue,
    tropical_matmul,
    weak_kam_from_barrier,
)
from .weakkam import (
    BarrierCache,
    Closure,
    Compose,
    Leaf,
    MinOf,
    RSpaceReport,
    Shift,
    SwitchedReport,
    Transition,
    WindowedPower,
    WordOperator,
    alpha_curve,
    aubry_set,
    default_catalog,
    default_seeds,
    detect_common_circle,
    finitize,
    r_space_probe,
    switched_invariance_check,
    weak_kam_solutions,
    word_label,
)

__version__ = "0.1.0"
