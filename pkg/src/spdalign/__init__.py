"""Cross-subject EEG transfer learning on the SPD manifold.

Tangent-space alignment (per-subject recentering, rescaling, supervised
rotation), regularised CSP fusion with Riemannian features, and a
leave-one-subject-out evaluation harness with cross-montage support.
"""

__version__ = "0.1.0"

from .alignment import (AlignmentModel, RotationModel, SubjectFeatureBlock,
                        align_adaptive_m, align_ts_baseline, apply_rotation,
                        fit_rotation, load_alignment_model, recenter_subject,
                        rescale_block, save_alignment_model)
from .classify import SvmModel, f1_per_class, f1_score, train_svm
from .covariance import (ShrinkageConfig, ledoit_wolf_gamma,
                         ledoit_wolf_shrink, shrunk_covariances,
                         trial_covariance)
from .dataio import (ContinuousRecording, MontageSpec, TrialSet, load_montage,
                     read_matrix, read_recording, read_store,
                     segment_trials, subset_montage, synth_generate,
                     write_matrix, write_recording, write_store)
from .errors import ConfigError, ConvergenceError, DataError, NumericalError
from .evaluate import (AblationReport, EvalReport, LearningCurveReport,
                       fit_performance_curves, run_ablation,
                       run_learning_curve, run_loso)
from .manifold import (frechet_mean, half_vectorize, log_euclidean_mean,
                       matrix_exp, matrix_invsqrt, matrix_log, matrix_sqrt,
                       riemannian_distance, tangent_project, unvectorize)
from .pipeline import (PcaModel, PipelineConfig, cross_montage_reduce,
                       feature_dimension, features_parallel,
                       features_sequential, fit_pca, pca_component_count)
from .stats import (PairedTestResult, lilliefors_normality, paired_t_test,
                    paired_tests, wilcoxon_signed_rank)
