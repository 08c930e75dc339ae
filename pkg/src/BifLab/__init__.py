from os.path import dirname, basename, isfile, join
import glob
import qcodes as qc

from .params import HurstParams, MultiParams, TimeGrid, QuadratureSpec
from .simulator import PathEnsemble, sample_paths
from .config import ExperimentConfig
from .report import ExperimentReport, MetricRecord, LIBRARY_VERSION
from .resolution_sweep import ResolutionSweep
from .runner import run

__version__ = LIBRARY_VERSION

qc.config.logger.console_level = "WARNING"

modules = glob.glob(join(dirname(__file__), "*.py"))
__all__ = [basename(f)[:-3] for f in modules if isfile(f) and not f.endswith("__init__.py")]
