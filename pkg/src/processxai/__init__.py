"""Explainable defect prediction for injection-moulding process data."""

from .dataset import DatasetError, ProcessDataset, load_csv, split, write_csv
from .smote import SmoteConfig, oversample
from .gbdt import BoostedEnsemble, ExactGreedyParams, GossParams, fit
from .attribution import ShapleyReport, explain, shapley_matrix
from .ice import ControlRange, control_range, ice_surface, ranges_table
from .validate import ValidationReport, validation_report
from .synth import SynthConfig, generate
from .config import PipelineConfig, load_config, parse_config
from .pipeline import Pipeline, run_pipeline

__version__ = "0.1.0"
