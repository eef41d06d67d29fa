"""Two-particle interference of atom pairs in momentum space.

Submodules:

* :mod:`atomhom.fock` - sparse Fock states, splitters, losses, correlators
* :mod:`atomhom.correlators` - visibility bounds and phase-averaged coincidences
* :mod:`atomhom.experiment` - Monte Carlo model of the pulse sequence
* :mod:`atomhom.estimators` - correlation estimators, dip fit, calibration
* :mod:`atomhom.config`, :mod:`atomhom.events_io`, :mod:`atomhom.cli`
"""

from .correlators import InputMoments, VisibilityPrediction, tmsv_visibility, visibility_bound
from .errors import (AtomHomError, ConfigError, CutoffError, DegenerateFitError, DomainError,
                     FitError, GeometryError, InputError, ModeError, UndefinedVisibilityError)
from .estimators import DipFit, IntegrationVolume, fit_dip
from .experiment import DetectorSpec, PulseSchedule, ShotEvents, SourceSpec, reference_scenario
from .fock import BeamSplitterSpec, FockState, LossSpec, ModeId

__version__ = "0.1.0"
