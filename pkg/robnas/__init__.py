__version__ = '0.1.0'
from .experiment import Experiment

__all__ = ["Experiment"]
