from .charts import Bounded, Chart, Homogeneous, ImplicitChart, Radial, holomorphic_chart, linear_chart
from .corpus import builtin, cone_over_plane_curve, names
from .loader import load, loads
from .space import (
    AMBIENT,
    GERM,
    GLOBAL,
    Annotation,
    LinkTable,
    StratifiedSpace,
    Stratum,
    ValidationReport,
    restrict_to_closure,
    validate,
)
