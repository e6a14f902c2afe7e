"""Sequential best-arm identification with informed mixture priors.

The package implements a sequential top-two Thompson sampler whose per-task
prior comes from a conditional model of which arm is optimal (Markov
kernels, linear-map Gaussian priors, or word-model transition tables),
baselines (vanilla top-two, uniform random, batch racing, binarized
Bernoulli Thompson), fixed-confidence and fixed-budget stopping rules,
expected-error bound calculators, a P300 speller reward simulator, and an
experiment harness with a CLI.
"""

from .algorithms import (BBTSState, BRState, TopTwoConfig, bbts_step,
                         bbts_update, br_eliminate, br_round, random_select,
                         top_two_select)
from .core import (Environment, PriorProvider, TaskSequence, categorical_draw,
                   pull, sample_gaussian_task_sequence, sample_task_sequence)
from .harness import (ExperimentConfig, Metrics, RunResult, allocation_study,
                      compute_metrics, expand_grid, prepare_shared,
                      run_experiment, run_task_sequence, sweep)
from .p300 import (NONTARGET, TARGET, CalibStats, EEGConfig, EEGEpoch,
                   ScoreChannel, SWLDAModel, electrode_positions,
                   export_calibration_text, export_model_table,
                   generate_calibration, generate_epoch, generate_epoch_batch,
                   p300_reward_channel, score, score_batch, spatial_kernel,
                   template, train_swlda)
from .posterior import (MixturePosterior, SufficientStats, gaussian_posterior,
                        update)
from .priors import (GaussianUPrior, MarkovPrior, MixturePriorParams,
                     WordModelTable, WordTableError, build_mixture_prior,
                     conditional_entropy, gaussian_prior_from_u,
                     gaussian_u_first_task_prior, load_word_table,
                     markov_next_dist, save_word_table, synthetic_word_table,
                     u_matrix)
from .rng import CALIBRATION, REWARD, SELECT, STOP, TASKGEN, RngStream
from .stopping import (ASYMPTOTIC, FIXED_BUDGET, FIXED_CONFIDENCE,
                       GROUPING_LITERAL, GROUPING_NESTED, MOMENT_MATCHED,
                       GLRInputs, StoppingConfig, asymptotic_threshold,
                       bbts_stop, bonferroni, budget_stop, chernoff_glr,
                       decide, gaussian_mixture_stop,
                       moment_matched_threshold)
from .theory import (AllocationSnapshot, BoundInputs, OracleBound,
                     Theorem1Bound, allocation_trace, kl_discrete,
                     optimal_allocation, oracle_bound, theorem1_bound)

__version__ = "0.1.0"
