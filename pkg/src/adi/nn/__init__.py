from .models import CRNN, FC_UNITS, Classifier, ModelSpec, ResBLSTM, build_crnn, build_model, build_resblstm
from .optim import Adam, AdamState, adam_step
from .train import (
    EpochRecord,
    TrainConfig,
    accuracy,
    backward,
    compare_embeddings,
    cross_entropy,
    cross_entropy_logits,
    embed,
    forward,
    predict_proba,
    train,
)
from .checkpoint import load_checkpoint, save_checkpoint
