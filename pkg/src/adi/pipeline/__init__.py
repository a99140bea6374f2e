from .manifest import Entry, Manifest, ManifestError, read_manifest, split_train_val, write_manifest
from .metrics import MetricsReport, classification_report, confusion_matrix, report_from_confusion
from .run import Run, RunConfig, StageError, run_pipeline, utterance_votes
from .synth import SynthConfig, generate_corpus
