from .autoencoder import Autoencoder, Decoder, Encoder, FeaturePyramid, build_autoencoder, reconstruct  # noqa: F401
from .backbones import backbone_names, backbone_recipe, register_backbone  # noqa: F401
from .checkpoint import (  # noqa: F401
    ModelWeights,
    load_checkpoint,
    load_into,
    save_checkpoint,
    weights_from_params,
)
from .classifiers import (  # noqa: F401
    ConvClassifier,
    build_dataset_classifier,
    build_task_classifier,
    classify_dataset,
    classify_task,
)
from .config import ModelConfig, config_hash, make_model_config  # noqa: F401
