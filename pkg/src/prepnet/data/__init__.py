from .manifest import (  # noqa: F401
    DatasetManifest,
    ImageSample,
    ManifestEntry,
    load_image,
    load_manifest,
    load_sample,
    save_manifest,
    save_png,
    split_dataset,
)
from .preprocess import PreprocessConfig, equalize_histogram, preprocess_image, resize_bilinear  # noqa: F401
from .synthetic import (  # noqa: F401
    DomainNuisance,
    SyntheticDomainSpec,
    default_benchmark_spec,
    generate_synthetic_benchmark,
)
