from .tensor import Tensor, no_grad, matmul, embedding, gelu, softmax, layer_norm, dropout, masked_cross_entropy
from .model import TokenSequence, TransformerConfig, SequenceTransformer, transformer_forward, masked_nll
from .optim import Adam
from .decode import DecodeSchedule, cosine_mask_ratio, remaining_mask_counts, iterative_decode, iterative_decode_batch
from .checkpoint import save_checkpoint, load_checkpoint

__all__ = [
    "Tensor", "no_grad", "matmul", "embedding", "gelu", "softmax", "layer_norm", "dropout",
    "masked_cross_entropy", "TokenSequence", "TransformerConfig", "SequenceTransformer",
    "transformer_forward", "masked_nll", "Adam", "DecodeSchedule", "cosine_mask_ratio",
    "remaining_mask_counts", "iterative_decode", "iterative_decode_batch",
    "save_checkpoint", "load_checkpoint",
]
