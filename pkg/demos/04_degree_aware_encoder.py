"""Inside the encoder: local contexts, bias predictors, corrected pooling.

Tail nodes receive a predicted missing-information message, super heads
subtract a predicted redundancy message, and head nodes aggregate exactly
as a standard network would.
"""
import numpy as np

from degalign import (
    GLOBAL,
    LOCAL,
    EncoderParams,
    Graph,
    MessageStructure,
    corrected_aggregate,
    encode,
    local_context,
    partition_by_degree,
    predict_missing,
    unforged_view,
)
from degalign.numerics import Tensor

# one super head (0), two heads (1, 2), three tails (3, 4, 5)
g = Graph(6, [(0, 1), (0, 2), (0, 3), (0, 4), (0, 5), (1, 2)])
part = partition_by_degree(g, tail_threshold=1, super_threshold=3)
print("classes:", part.counts())

view = unforged_view(g)
struct = MessageStructure(view, part)
params = EncoderParams.init(dim_in=4, dim_hidden=8, dim_out_half=3, rng_seed=0)
x = np.random.default_rng(1).normal(size=(6, 4))

layer = params.stacks[GLOBAL][0]
ctx = local_context(Tensor(x), struct)
print("local context shape (own row ++ neighborhood mean):", ctx.shape)

missing = predict_missing(ctx, layer)
print("missing-info predictions start at zero (fresh init):",
      float(np.abs(missing.data).max()) == 0.0)

out, _, _ = corrected_aggregate(Tensor(x), struct, layer, GLOBAL)
print("mean-pool layer output:", out.shape)
out, _, _ = corrected_aggregate(Tensor(x), struct, params.stacks[LOCAL][0], LOCAL)
print("attention layer output:", out.shape)

# The full two-layer, two-stack encoder concatenates both halves.
encoded = encode(view, part, x, params)
print("embedding:", encoded.embedding.shape, "| caches per stack+layer:",
      len(encoded.missing_caches))

# After random training the predictors produce nonzero corrections for tails
# only where they are allowed to act; the constraint loss polices the rest.
layer.missing_global.data += 0.5
out_full, missing, _ = corrected_aggregate(Tensor(x), struct, layer, GLOBAL)
print("with a nonzero shared vector, tail corrections engage:",
      float(np.abs(missing.data[part.tail_mask]).max()) > 0)
