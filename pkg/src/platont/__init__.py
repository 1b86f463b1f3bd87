"""Network tomography workbench: simulation, multi-indicator denoising, tasks."""

from ._exceptions import PlatontError
from ._exceptions import InvalidArgumentError
from ._exceptions import ValidationError
from ._exceptions import FormatError
from ._exceptions import UnreachablePairError
from ._exceptions import ShapeError
from ._exceptions import StateError
from ._exceptions import DegenerateEmbeddingError
from ._exceptions import NumericError
from ._exceptions import RankDeficiencyError
from ._exceptions import ConvergenceError
from ._exceptions import UnsupportedTaskError

from ._common import INDICATORS

from ._network import Link
from ._network import Network
from ._network import Path
from ._network import PathSet
from ._network import RoutingMatrix

from ._network import generate_random_tree
from ._network import load_topology
from ._network import save_topology
from ._network import enumerate_paths
from ._network import build_routing_matrix
from ._network import default_probe_pairs

from ._simulation import NoiseKind
from ._simulation import LinkLoading
from ._simulation import IndicatorBatch
from ._simulation import TomographyDataset

from ._simulation import simulate_states
from ._simulation import aggregate_path
from ._simulation import measure_paths
from ._simulation import inject_noise
from ._simulation import generate_od_scenario
from ._simulation import build_dataset
from ._simulation import save_dataset
from ._simulation import load_dataset

from ._theory import PmiMatrix
from ._theory import Theorem1Report
from ._theory import GradientBundle
from ._theory import Proposition1Report

from ._theory import symmetric_eigen
from ._theory import pmi_from_counts
from ._theory import theorem1_shift
from ._theory import build_a1a2_instance
from ._theory import feature_map
from ._theory import proposition1_check
from ._theory import run_theorem1_suite
from ._theory import run_proposition1_suite

from ._tomography import Task
from ._tomography import DiagnosisResult
from ._tomography import OdEstimate
from ._tomography import InferredTopology
from ._tomography import LinkScores

from ._tomography import calibrate_threshold
from ._tomography import diagnose_congested_links
from ._tomography import solve_linear_inverse
from ._tomography import gravity_prior
from ._tomography import estimate_od
from ._tomography import infer_link_loads
from ._tomography import infer_topology_rnj
from ._tomography import link_scores
from ._tomography import error_gap
from ._tomography import metrics

from ._neural import ModelConfig
from ._neural import Standardizer
from ._neural import Model
from ._neural import ForwardState

from ._neural import init_model
from ._neural import encode
from ._neural import aggregate_latents
from ._neural import decode
from ._neural import forward
from ._neural import backward
from ._neural import save_checkpoint
from ._neural import load_checkpoint

from ._objectives import ReconstructionMode
from ._objectives import LossWeights
from ._objectives import LossReport

from ._objectives import alignment_loss
from ._objectives import reconstruction_loss
from ._objectives import task_loss
from ._objectives import total_loss

from ._trainer import TrainConfig
from ._trainer import TrainResult

from ._trainer import load_config
from ._trainer import lr_schedule
from ._trainer import clip_global_norm
from ._trainer import optimizer_step
from ._trainer import train

from ._baselines import PcaModel
from ._baselines import CcaModel
from ._baselines import IndicatorCca

from ._baselines import pca_fit
from ._baselines import pca_fit_denoise
from ._baselines import cca_fit
from ._baselines import cca_denoise
from ._baselines import cca_fit_indicators

from ._experiments import Pipeline
from ._experiments import RunConfig
from ._experiments import PipelineResult

from ._experiments import denoise
from ._experiments import evaluate_pipeline
from ._experiments import run_experiment_matrix
from ._experiments import summarise
from ._experiments import write_tables
from ._experiments import report
