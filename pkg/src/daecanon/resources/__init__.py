from .canonical import Canonical, CanonicalObjects, PureOde
from .frontends import Frontends, MultibodyForm, Step0Outcome
from .pipeline import Pipeline, PipelineResult, Stage
from .solver import FundamentalMatrix, Solver, Trajectory

__all__ = [
    'Canonical', 'CanonicalObjects', 'PureOde',
    'Frontends', 'MultibodyForm', 'Step0Outcome',
    'Pipeline', 'PipelineResult', 'Stage',
    'FundamentalMatrix', 'Solver', 'Trajectory',
]
