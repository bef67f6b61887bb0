"""Learning primal/dual LP solutions by minimizing KKT residual losses."""
from .errors import *  # noqa: F401,F403
from .problem import (KktPoint, LossTerms, LossWeights, ProblemInstance, combined_loss,
                      data_loss, kkt_loss, kkt_residual_losses, normalize)
from .oracle import SolveOutcome, Status, accept_instance, solve_lp, verify_kkt
from .dataset import GenConfig, LabeledExample, generate, read_jsonl, split, write_jsonl

__version__ = "0.1.0"
