__all__ = ['PylatsError', 'ShapeError', 'StabilityError', 'ContainerError', 'ConfigError', 'NumericalError',
           'GraphError', 'TrainingDiverged', 'get_logger', 'load_example_config', 'example_config_path']

# Internal Cell
#exporti
import logging
import os

# Cell
class PylatsError(Exception):
    """Base class for every error raised by pylats."""


class ShapeError(PylatsError, ValueError):
    pass


class StabilityError(PylatsError, ValueError):
    """An explicit scheme was asked to run outside its stability bound."""

    def __init__(self, message, number=None):
        super().__init__(message)
        self.number = number


class ContainerError(PylatsError, ValueError):
    pass


class ConfigError(PylatsError, ValueError):
    pass


class NumericalError(PylatsError, FloatingPointError):
    """NaN or Inf showed up. `where` holds the parameter id or timestep index."""

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


class GraphError(PylatsError, RuntimeError):
    pass


class TrainingDiverged(NumericalError):
    """Training hit a non-finite loss. The model already holds the last good parameters."""

    def __init__(self, message, where=None, loss_curve=None):
        super().__init__(message, where)
        self.loss_curve = loss_curve

# Cell
def get_logger(name='pylats', level=logging.INFO):
    """
    Return a logger with a single stream handler attached. Library modules only call logging.getLogger,
    the command line entry point calls this once.
    """
    logger = logging.getLogger(name)
    if not logger.handlers:
        h = logging.StreamHandler()
        h.setFormatter(logging.Formatter("%(asctime)s | %(levelname)s | %(message)s", "%Y-%m-%d %H:%M:%S"))
        logger.addHandler(h)
    logger.setLevel(level)
    return logger

# Cell
def example_config_path(name):
    """
    Path of one of the packaged example configurations, e.g. 'desk_diffusion_reaction'.
    """
    data_dir = os.path.dirname(os.path.abspath(__file__)) + '/pkg_data/'
    if not name.endswith('.ini'):
        name = name + '.ini'
    return data_dir + name

# Cell
def load_example_config(name):
    """
    Read a packaged example experiment configuration.
    """
    from .config import ExperimentConfig
    return ExperimentConfig.read(example_config_path(name))
