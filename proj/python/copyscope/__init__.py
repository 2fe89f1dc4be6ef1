"""Image-similarity metrics, FID and Shapley/leave-one-out attribution."""

from ._core import (  # noqa: F401
    CopyscopeError,
    Image,
    ImageSet,
    ValueTable,
    __version__,
    ablate,
    check_axioms,
    cosine_similarity,
    dhash,
    dhash_similarity,
    fid,
    fid_features,
    fit_gaussian,
    hist_similarity,
    load_image,
    load_image_set,
    load_value_table,
    loo,
    matrix_sqrt_psd,
    read_feature_file,
    resize,
    rgb_ssim,
    save_png,
    shapley_exact,
    shapley_sampled,
    ssim,
    to_grayscale,
    write_feature_file,
)
