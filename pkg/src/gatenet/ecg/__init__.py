"""MIT-BIH ingestion, inter-patient split and per-beat feature extraction."""

from .aami import DS1, DS2, map_aami, split_inter_patient
from .dataset import CountReport, FeatureSet, MissingRecordsError, build_dataset
from .features import BeatFeatures, LocalRrState, extract_features, record_features
from .wfdb_io import EcgRecord, WfdbParseError, read_record

__all__ = [
    "DS1", "DS2", "BeatFeatures", "CountReport", "EcgRecord", "FeatureSet",
    "LocalRrState", "MissingRecordsError", "WfdbParseError", "build_dataset",
    "extract_features", "map_aami", "read_record", "record_features",
    "split_inter_patient",
]
