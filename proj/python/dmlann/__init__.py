"""Distributed ML-ANN search over chi-square histogram features."""

from ._core import (
    ClusterModel,
    DistanceMatrix,
    HogParams,
    Index,
    QueryTrace,
    ReferenceSet,
    allocate_selections,
    build_distance_matrix,
    chi_square,
    conditional_density,
    extract_directory,
    extract_hog,
    generate_synthetic,
    global_medoid,
    hog_dimension,
    kmeans,
    load_image,
    phi,
    search_bruteforce,
    search_dmlann,
    search_mlann,
    weights_from_averages,
)

__all__ = [
    "ClusterModel",
    "DistanceMatrix",
    "HogParams",
    "Index",
    "QueryTrace",
    "ReferenceSet",
    "allocate_selections",
    "build_distance_matrix",
    "chi_square",
    "conditional_density",
    "extract_directory",
    "extract_hog",
    "generate_synthetic",
    "global_medoid",
    "hog_dimension",
    "kmeans",
    "load_image",
    "phi",
    "search_bruteforce",
    "search_dmlann",
    "search_mlann",
    "weights_from_averages",
]
