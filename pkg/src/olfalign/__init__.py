"""olfalign: alignment analyses between odorant embeddings and human
olfactory perception data."""

__version__ = "0.1.0"

from .core_data import (
    BinaryLabelSet,
    DatasetBundle,
    EmbeddingTable,
    Odorant,
    PerSubjectRatings,
    RatingSet,
    SimilarityJudgmentSet,
    join,
    load_embedding_table,
    load_perceptual,
    mixture_embedding,
    parse_odorant_key,
)
from .metrics import NoiseCeiling, RocCurve, noise_ceiling, nrmse, pearson, roc_auc_micro, roc_curve
from .physchem import DescriptorTable, load_descriptor_table, physchem_layer_sweep, run_physchem_decoding
from .preproc import (
    PcaModel,
    Standardizer,
    apply_pca,
    apply_standardizer,
    cosine_similarity,
    fit_pca,
    fit_standardizer,
)
from .probes import (
    CvResult,
    HyperGrid,
    LinearModel,
    LogisticModel,
    ProbePreprocessing,
    SplitPlan,
    alpha_max,
    fit_lasso,
    fit_logistic,
    make_splits,
    nested_cv_select,
    predict_linear,
    predict_logistic,
    run_probe_protocol,
)
from .rsa import Rsm, RsaResult, build_rsm, layer_sweep, pairwise_model_similarities, rsa_correlation
