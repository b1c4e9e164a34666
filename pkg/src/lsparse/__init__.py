"""Sparse-responsibility variational inference.

Gaussian and categorical mixtures and latent Dirichlet allocation whose
local steps keep only the L largest responsibilities per observation or
token, trained by stochastic (SVI) or memoized (MVI) variational inference.
"""
from .config import ConfigError, TrainConfig
from .corpus import Corpus, Document
from .estimators import SparseGaussianMixture, SparseLDA
from .evaluation import (HeldoutReport, bench, distance_cdf, doc_completion_score, make_completion_splits,
                         mixture_heldout)
from .expfam import CategoricalDirichlet, DirichletPosterior, GaussianWishart, WishartPosterior
from .lda import DENSE, LdaGlobalState, LdaSuffStats, LocalStepConfig, lda_elbo, lda_global_step, local_step_batch
from .mixture import MixGlobalState, MixSuffStats, elbo, global_step, local_step, summary_step
from .resp import SparseResp, dense_resp_from_weights, densify, top_l_resp_from_weights
from .selection import select_top_l
from .snapshot import load_snapshot, save_snapshot
from .special import digamma
from .train import LdaTask, LearningRateSchedule, MixtureTask, Trace, run

__version__ = "0.1.0"
