# RBF-kernel support vector machine trained with SMO

from . import vggish
from .smo import SmoResult, dual_objective, kkt_residuals, rbf_kernel, smo_solve
from .model import (ACOUSTIC_FEATURE_SIZE, DEEP_FEATURE_SIZE, SvmModel, SvmPrediction,
                    concat_dsf_af, fit, load_svm, predict, predict_batch, save_svm)
from .vggish import load_embeddings
