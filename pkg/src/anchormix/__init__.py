"""Anchored Bayesian mixtures of linear regressions."""

from .core import (AnchorSet, Dataset, MixRegParams, RegPrior, anchored_loglik,
                   center_predictor, check_responsibilities, load_dataset, mixreg_loglik)
from .numerics import (KMeansResult, RngStream, SymEigResult, assign_anchors, kmeans,
                       sample_categorical, sample_dirichlet, sample_gamma, sample_mvn,
                       sample_normal, sym_eig)
from .em_anchor import (EmTrace, MvnMixParams, MvnPrior, anchor_step, em_mvn_estep,
                        em_mvn_mstep, em_objective, em_reg_estep, em_reg_mstep,
                        run_anchored_em)
from .cdw import (InfluenceSummary, WeightMatrix, cdw_anchors, cdw_select_anchors, gibbs_slr,
                  case_deleted_mean, influence_summary, log_case_deletion_weights,
                  normalize_weights)
from .gibbs import (FitSummary, PosteriorChain, adjusted_rand_index, gibbs_anchored_mixreg,
                    label_switch_diagnostic, map_allocations, taxonomy_crosstab)
from .synthetic import simulate_mixreg, write_csv

__version__ = "0.1.0"
