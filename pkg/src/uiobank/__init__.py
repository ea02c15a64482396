"""Secure state estimation and attack isolation with banks of unknown-input observers."""
from .bank import build_bank, bank_step, compute_pi, select
from .harness import run
from .model import AttackScenario, RunSettings, SystemModel, load_config, step_plant
from .recon import isolate, reconstruct
from .synthesis import build_complete_uio, build_partial_uio, synthesize_gain, verify_contraction
