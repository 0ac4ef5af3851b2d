"""Privacy-audit workbench for curriculum-trained tabular classifiers."""

__version__ = "0.1.0"

from .errors import AuditError, ConfigError, InputError, StageError  # noqa: F401

from . import nn  # noqa: E402,F401  (ordering: no intra-package cycles)
from . import data  # noqa: E402,F401
from . import curriculum  # noqa: E402,F401
from . import mia  # noqa: E402,F401
from . import aia  # noqa: E402,F401
from . import analysis  # noqa: E402,F401
from . import defense  # noqa: E402,F401
from . import harness  # noqa: E402,F401

from .curriculum import Curriculum, PacingSchedule  # noqa: E402,F401
from .data import Dataset, SplitPlan  # noqa: E402,F401
from .harness import AuditReport, ExperimentConfig, run_experiment  # noqa: E402,F401
from .mia import AdversaryKnowledge, AttackModel, DiffCaliState  # noqa: E402,F401
from .mia import MembershipVerdict  # noqa: E402,F401
from .nn import Network, TrainConfig  # noqa: E402,F401
