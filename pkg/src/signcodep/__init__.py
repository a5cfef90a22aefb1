"""Phonological co-dependence analysis of 2D sign-language pose streams."""

__version__ = "0.1.0"

from .filtering import FilterConfig, FilterVerdict, RejectReason, filter_frame
from .ingest import (
    CorpusManifest,
    Frame,
    Hand,
    MalformedFile,
    ManifestError,
    load_corpus,
    parse_frame_file,
    read_manifest,
)
from .phonology import (
    LocationBin,
    LocationConfig,
    OrientationBin,
    PhonologicalAnnotation,
    annotate_frame,
    body_anchor_points,
    finger_orientation,
    hand_centroid,
    hand_location,
)
from .report import compare_languages, relative_frequencies
from .stats import (
    ContingencyTable,
    accumulate,
    chi_square_2x2,
    post_hoc_decompose,
    significance_map,
)
